//! Network GARCH: `h_it = ω + α r²_{i,t−1} + λ (W r²_{t−1})_i + β h_{i,t−1}`,
//! estimated by the same Gaussian quasi-likelihood as the NHEAVY equations.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{
    fit_equation, sandwich, std_errors, to_rows, Equation, EquationConvergence, FitConfig, FitMethod, InitRule, Layout,
    QllValue, TargetMoments,
};
use crate::model::{Panel, PanelSeries, Regressors, Slopes};
use crate::network::NormalizedNetwork;
use crate::rng::{stream_rng, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NgarchParams {
    pub omega: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub beta: f64,
}

impl NgarchParams {
    pub const fn new(omega: f64, alpha: f64, lambda: f64, beta: f64) -> Self {
        Self { omega, alpha, lambda, beta }
    }

    pub fn slopes(&self) -> Slopes {
        Slopes::new(self.alpha, self.lambda, self.beta)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.omega, self.alpha, self.lambda, self.beta]
    }

    /// Nonnegativity and `α + λ + β < 1`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("omega", self.omega), ("alpha", self.alpha), ("lambda", self.lambda), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return invalid(format!("ngarch {name} must be finite and >= 0, got {v}"));
            }
        }
        let s = self.alpha + self.lambda + self.beta;
        if s >= 1.0 {
            return invalid(format!("ngarch alpha + lambda + beta must be < 1, got {s}"));
        }
        Ok(())
    }
}

/// Default one-step start: the NHEAVY return-equation initializer with `β`
/// lowered to satisfy `α + λ + β < 1`.
pub const NGARCH_ONE_STEP_INIT: NgarchParams = NgarchParams::new(0.005, 0.05, 0.05, 0.8);
pub const NGARCH_TWO_STEP_INIT: Slopes = Slopes::new(0.05, 0.05, 0.8);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgarchFit {
    pub method: FitMethod,
    /// Under targeting `omega` is the mean of `intercepts`.
    pub params: NgarchParams,
    pub intercepts: Vec<f64>,
    pub qll: QllValue,
    pub param_names: Vec<String>,
    pub cov: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    pub kappa2: f64,
    pub converged: bool,
    pub convergence: EquationConvergence,
    pub mu: Option<Vec<f64>>,
    pub init_rule: InitRule,
    pub warnings: Vec<String>,
}

fn check(panel: &PanelSeries, w: &NormalizedNetwork) -> Result<()> {
    if w.n() != panel.n() {
        return invalid(format!("network has {} nodes but panel has {} assets", w.n(), panel.n()));
    }
    if panel.t_len() < 2 {
        return invalid(format!("estimation needs T >= 2, got {}", panel.t_len()));
    }
    Ok(())
}

pub fn fit_ngarch_one_step(
    panel: &PanelSeries,
    w: &NormalizedNetwork,
    init: Option<&NgarchParams>,
    cfg: &FitConfig,
) -> Result<NgarchFit> {
    check(panel, w)?;
    let init = init.copied().unwrap_or(NGARCH_ONE_STEP_INIT);
    init.validate()?;
    let reg = Regressors::new(w, &panel.r2);
    let eq = Equation::new(&panel.r2, &reg, cfg.init_rule.initial_values(&panel.r2), None);
    finish(FitMethod::OneStep, &eq, Layout::FreeSimplex, &init.to_array(), None, panel, cfg)
}

pub fn fit_ngarch_two_step(
    panel: &PanelSeries,
    w: &NormalizedNetwork,
    init: Option<&Slopes>,
    cfg: &FitConfig,
) -> Result<NgarchFit> {
    check(panel, w)?;
    let init = init.copied().unwrap_or(NGARCH_TWO_STEP_INIT);
    let mu = panel.r2.column_means();
    if let Some((i, m)) = mu.iter().enumerate().find(|(_, m)| !(**m > 0.0)) {
        return invalid(format!("mean squared return of asset {i} must be positive, got {m}"));
    }
    let targets = TargetMoments { own: mu.clone(), lag: mu.clone(), net: w.apply(&mu) };
    let reg = Regressors::new(w, &panel.r2);
    let eq = Equation::new(&panel.r2, &reg, cfg.init_rule.initial_values(&panel.r2), Some(targets));
    finish(FitMethod::TwoStep, &eq, Layout::TargetSimplex, &init.to_array(), Some(mu), panel, cfg)
}

fn finish(
    method: FitMethod,
    eq: &Equation,
    layout: Layout,
    p0: &[f64],
    mu: Option<Vec<f64>>,
    panel: &PanelSeries,
    cfg: &FitConfig,
) -> Result<NgarchFit> {
    let fit = fit_equation(eq, layout, p0, &cfg.optimizer)?;
    let (c, s) = eq.split(&fit.p);
    let omega = c.iter().sum::<f64>() / c.len() as f64;
    let contrib = eq
        .contributions(&fit.p)
        .ok_or_else(|| Error::Evaluation("filtered variances are not strictly positive at the estimate".into()))?;
    let parts = sandwich(&[&contrib], panel.n(), panel.t_len());
    let mut warnings = parts.warnings;
    if !fit.convergence.converged {
        warnings.push(format!(
            "ngarch fit did not converge: gradient max-norm {:.3e} after {} iterations",
            fit.convergence.grad_max_norm, fit.convergence.iterations
        ));
    }
    let names: &[&str] = match method {
        FitMethod::OneStep => &["omega", "alpha", "lambda", "beta"],
        FitMethod::TwoStep => &["alpha", "lambda", "beta"],
    };
    Ok(NgarchFit {
        method,
        params: NgarchParams::new(omega, s.alpha, s.lambda, s.beta),
        intercepts: c,
        qll: fit.qll,
        param_names: names.iter().map(|s| s.to_string()).collect(),
        std_errors: std_errors(&parts.cov),
        cov: to_rows(&parts.cov),
        kappa2: parts.kappa[(0, 0)],
        converged: fit.convergence.converged,
        convergence: fit.convergence,
        mu,
        init_rule: cfg.init_rule,
        warnings,
    })
}

/// Filtered variances with per-asset intercepts, `h_{i0} = init_i`.
pub fn ngarch_filter(
    intercepts: &[f64],
    slopes: Slopes,
    w: &NormalizedNetwork,
    r2: &Panel,
    init: &[f64],
) -> Result<Panel> {
    let n = r2.n();
    if w.n() != n || intercepts.len() != n || init.len() != n {
        return invalid(format!("ngarch filter inputs must all describe {n} assets"));
    }
    let reg = Regressors::new(w, r2);
    Ok(crate::model::recursion(intercepts, slopes, &reg, init))
}

/// `s`-day-ahead variance forecasts from the last observed day, for
/// `s = 1..=horizon`. Day one uses the observed `r²_T`; later days replace
/// `r²` by its forecast, `h_{T+j+1} = c + ((α+β) I + λ W) h_{T+j}`.
pub fn ngarch_forecast(
    intercepts: &[f64],
    slopes: Slopes,
    w: &NormalizedNetwork,
    r2_last: &[f64],
    h_last: &[f64],
    horizon: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = w.n();
    if intercepts.len() != n || r2_last.len() != n || h_last.len() != n {
        return invalid(format!("ngarch forecast inputs must all describe {n} assets"));
    }
    let mut out = Vec::with_capacity(horizon);
    let wr = w.apply(r2_last);
    let mut h: Vec<f64> = (0..n)
        .map(|i| intercepts[i] + slopes.alpha * r2_last[i] + slopes.lambda * wr[i] + slopes.beta * h_last[i])
        .collect();
    for _ in 0..horizon {
        out.push(h.clone());
        let wh = w.apply(&h);
        h = (0..n).map(|i| intercepts[i] + (slopes.alpha + slopes.beta) * h[i] + slopes.lambda * wh[i]).collect();
    }
    Ok(out)
}

/// Simulates `r²_it = z²_it h_it` with standard normal `z`; realized measures
/// are set equal to `r²`.
pub fn simulate_ngarch(
    params: &NgarchParams,
    w: &NormalizedNetwork,
    t_len: usize,
    burn_in: usize,
    seed: u64,
) -> Result<(PanelSeries, Panel)> {
    simulate_ngarch_with(params, w, t_len, burn_in, &mut stream_rng(seed, 0))
}

fn simulate_ngarch_with(
    params: &NgarchParams,
    w: &NormalizedNetwork,
    t_len: usize,
    burn_in: usize,
    rng: &mut SimRng,
) -> Result<(PanelSeries, Panel)> {
    params.validate()?;
    if t_len == 0 {
        return invalid("t_len must be positive");
    }
    let n = w.n();
    let level = params.omega / (1.0 - params.alpha - params.lambda - params.beta);
    let (mut h_prev, mut r2_prev) = (vec![level; n], vec![level; n]);
    let mut r2_out = Panel::zeros(t_len, n);
    let mut h_out = Panel::zeros(t_len, n);
    let mut h = vec![0.0; n];
    let mut r2 = vec![0.0; n];
    for step in 0..burn_in + t_len {
        let wr = w.apply(&r2_prev);
        for i in 0..n {
            h[i] = params.omega + params.alpha * r2_prev[i] + params.lambda * wr[i] + params.beta * h_prev[i];
            let z: f64 = rng.sample(StandardNormal);
            r2[i] = z * z * h[i];
        }
        if step >= burn_in {
            r2_out.row_mut(step - burn_in).copy_from_slice(&r2);
            h_out.row_mut(step - burn_in).copy_from_slice(&h);
        }
        std::mem::swap(&mut h_prev, &mut h);
        std::mem::swap(&mut r2_prev, &mut r2);
    }
    Ok((PanelSeries::new(r2_out.clone(), r2_out)?, h_out))
}
