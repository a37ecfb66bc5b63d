//! Network HEAVY volatility modelling.
//!
//! The crate covers the whole workflow around a panel of daily squared
//! returns and realized measures linked by a stock network:
//!
//! - [`network`]: adjacency matrices, row normalisation and random designs,
//! - [`model`]: parameters, filtering recursions, block dynamics, closed-form
//!   multistep forecasts and simulation,
//! - [`estimation`]: quasi-likelihoods, analytic scores, one-step and
//!   targeting (two-step) QMLE and sandwich covariances,
//! - [`realized`]: intraday diffusion simulation, microstructure noise and
//!   realized variance estimators,
//! - [`evaluation`]: QLIKE, the network GARCH comparator, backtests and the
//!   Monte Carlo RMSE harness.

pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod model;
pub mod network;
pub mod optim;
pub mod realized;
pub mod rng;

pub use error::{Error, Result};
