//! Forecasts from the last observed day for fitted NHEAVY coefficients.
//!
//! The state one day past the data, `(h_{T+1}, μ_{T+1})`, is known exactly
//! because it only involves `RM_T`. Longer horizons apply the closed-form
//! multistep formula from that state: `s` days ahead uses
//! `Σ_{k=0}^{s−2} B^k w + B^{s−1} x_{T+1}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimation::{FitMethod, FitResult, InitRule};
use crate::model::{
    block_dynamics_with_intercepts, forecast_with_dynamics, recursion, Forecast, LatentPanels, NheavyParams,
    PanelSeries, Regressors, Slopes,
};
use crate::network::NormalizedNetwork;

/// NHEAVY coefficients with per-asset intercepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NheavyCoefficients {
    pub phi: Slopes,
    pub phi_r: Slopes,
    pub c_r: Vec<f64>,
    pub c_rm: Vec<f64>,
}

impl NheavyCoefficients {
    pub fn from_params(p: &NheavyParams, n: usize) -> Self {
        Self { phi: p.phi.slopes(), phi_r: p.phi_r.slopes(), c_r: vec![p.phi.omega; n], c_rm: vec![p.phi_r.omega; n] }
    }

    /// Uses the per-asset intercepts of a targeting fit when present.
    pub fn from_fit(fit: &FitResult, n: usize) -> Self {
        match (&fit.method, &fit.intercepts) {
            (FitMethod::TwoStep, Some(c)) => Self {
                phi: fit.theta_hat.phi.slopes(),
                phi_r: fit.theta_hat.phi_r.slopes(),
                c_r: c.r.clone(),
                c_rm: c.rm.clone(),
            },
            _ => Self::from_params(&fit.theta_hat, n),
        }
    }

    pub fn n(&self) -> usize {
        self.c_r.len()
    }

    /// Filters both recursions over `panel` with the given initial values.
    pub fn filter(&self, w: &NormalizedNetwork, panel: &PanelSeries, rule: InitRule) -> Result<LatentPanels> {
        self.filter_from(w, panel, &rule.initial_values(&panel.r2), &rule.initial_values(&panel.rm))
    }

    /// Filters both recursions from explicit first-day values.
    pub fn filter_from(
        &self,
        w: &NormalizedNetwork,
        panel: &PanelSeries,
        h0: &[f64],
        mu0: &[f64],
    ) -> Result<LatentPanels> {
        let n = self.n();
        if panel.n() != n || w.n() != n || h0.len() != n || mu0.len() != n {
            return invalid(format!("coefficients describe {n} assets, panel {}, network {}", panel.n(), w.n()));
        }
        let reg = Regressors::new(w, &panel.rm);
        let h = recursion(&self.c_r, self.phi, &reg, h0);
        let mu = recursion(&self.c_rm, self.phi_r, &reg, mu0);
        Ok(LatentPanels { h, mu })
    }

    /// `(h_{T+1}, μ_{T+1})` from the last day's realized measure and states.
    pub fn one_step_ahead(
        &self,
        w: &NormalizedNetwork,
        rm_last: &[f64],
        h_last: &[f64],
        mu_last: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let wrm = w.apply(rm_last);
        let n = self.n();
        let next = |c: &[f64], s: Slopes, x: &[f64]| -> Vec<f64> {
            (0..n).map(|i| c[i] + s.alpha * rm_last[i] + s.lambda * wrm[i] + s.beta * x[i]).collect()
        };
        (next(&self.c_r, self.phi, h_last), next(&self.c_rm, self.phi_r, mu_last))
    }

    /// Forecasts for horizons `1..=horizon` days past the last observed day.
    pub fn forecasts(
        &self,
        w: &NormalizedNetwork,
        rm_last: &[f64],
        h_last: &[f64],
        mu_last: &[f64],
        horizon: usize,
    ) -> Result<Vec<Forecast>> {
        let n = self.n();
        if w.n() != n || rm_last.len() != n || h_last.len() != n || mu_last.len() != n {
            return invalid(format!("last-day state must have {n} entries per series"));
        }
        if h_last.iter().chain(mu_last).any(|v| !(*v > 0.0)) {
            return invalid("last-day states must be strictly positive");
        }
        let (h1, mu1) = self.one_step_ahead(w, rm_last, h_last, mu_last);
        let dy = block_dynamics_with_intercepts(self.phi, self.phi_r, &self.c_r, &self.c_rm, w);
        let mut out = Vec::with_capacity(horizon);
        for s in 1..=horizon {
            if s == 1 {
                let stationary = crate::model::spectral_radius(&dy.b_mat) < 1.0;
                out.push(Forecast { h: h1.clone(), mu: mu1.clone(), stationary });
            } else {
                out.push(forecast_with_dynamics(&dy, &h1, &mu1, s - 2)?);
            }
        }
        Ok(out)
    }
}
