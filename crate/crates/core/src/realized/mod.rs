//! Intraday price simulation, microstructure noise and daily realized
//! measures.
//!
//! Day `l` (0-based) carries `M` ticks at times `l + m/M`, `m = 1..=M`, so the
//! last tick is the close. Daily returns are close-to-close, with the first
//! day measured from [`IntradayPanel::start`]. Realized measures use the `M`
//! ticks inside the day only (`M − 1` increments).

mod diffusion;
mod estimators;
mod io;
mod pipeline;

pub use diffusion::{add_noise, add_noise_with, simulate_diffusion, simulate_diffusion_with, DiffusionSpec};
pub use estimators::{
    build_panel, build_panel_with_returns, default_scales, msrv_weights, multiscale_rv, rv_naive, RmEstimator,
};
pub use io::{read_intraday_csv, write_intraday_csv};
pub use pipeline::{simulate_pipeline, simulate_pipeline_with, PipelineSimulation, PipelineSpec};

use crate::error::{invalid, Result};

/// `L × M × N` log prices plus the reference price before the first day.
#[derive(Debug, Clone, PartialEq)]
pub struct IntradayPanel {
    l_days: usize,
    m_ticks: usize,
    n: usize,
    start: Vec<f64>,
    logp: Vec<f64>,
}

impl IntradayPanel {
    pub fn new(l_days: usize, m_ticks: usize, n: usize, start: Vec<f64>, logp: Vec<f64>) -> Result<Self> {
        if start.len() != n || logp.len() != l_days * m_ticks * n {
            return invalid(format!(
                "intraday panel needs {n} start prices and {} ticks, got {} and {}",
                l_days * m_ticks * n,
                start.len(),
                logp.len()
            ));
        }
        if let Some(v) = start.iter().chain(&logp).find(|v| !v.is_finite()) {
            return Err(crate::Error::Data(format!("non-finite log price {v}")));
        }
        Ok(Self { l_days, m_ticks, n, start, logp })
    }

    pub fn l_days(&self) -> usize {
        self.l_days
    }

    pub fn m_ticks(&self) -> usize {
        self.m_ticks
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn get(&self, day: usize, tick: usize, asset: usize) -> f64 {
        self.logp[(day * self.m_ticks + tick) * self.n + asset]
    }

    /// Ticks of one asset on one day.
    pub fn day_series(&self, day: usize, asset: usize) -> Vec<f64> {
        (0..self.m_ticks).map(|m| self.get(day, m, asset)).collect()
    }

    /// Closing log price of `day`.
    pub fn close(&self, day: usize, asset: usize) -> f64 {
        self.get(day, self.m_ticks - 1, asset)
    }

    fn check_index(&self, day: usize, asset: usize) -> Result<()> {
        if day >= self.l_days || asset >= self.n {
            return invalid(format!("day {day} / asset {asset} outside {}x{}", self.l_days, self.n));
        }
        Ok(())
    }
}
