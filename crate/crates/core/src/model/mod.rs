//! The NHEAVY model: parameters, recursions, dynamics and simulation.
//!
//! For asset `i` on day `t`
//!
//! ```text
//! h_it = ω   + α   RM_{i,t-1} + λ   (W RM_{t-1})_i + β   h_{i,t-1}
//! μ_it = ω_R + α_R RM_{i,t-1} + λ_R (W RM_{t-1})_i + β_R μ_{i,t-1}
//! ```
//!
//! where `h_it` is the conditional variance of the daily return and `μ_it`
//! the conditional mean of the realized measure.

mod dynamics;
mod filter;
mod innovations;
mod panel;
mod params;
mod simulate;

pub use dynamics::{
    b_power, block_dynamics_with_intercepts, build_block_dynamics, check_stationarity, forecast,
    forecast_with_dynamics, spectral_radius, targeting_intercepts, unconditional_mean, BlockDynamics, Forecast,
    StationarityReport, TargetIntercepts,
};
pub use filter::{filter, head_sum_init, recursion, FilterInit, Regressors};
pub use innovations::{InnovationSpec, UnitMeanLaw};
pub use panel::{fmt_f64, LatentPanels, Panel, PanelSeries};
pub use params::{EquationParams, NheavyParams, Slopes};
pub use simulate::{simulate_nheavy, simulate_nheavy_with, Simulation, DEFAULT_BURN_IN};
