//! Quasi-likelihoods, analytic scores, QMLE fits and sandwich covariances.
//!
//! Each equation is scored with the Gaussian-form criterion
//!
//! ```text
//! L(φ) = T^{-1} Σ_{t=2}^{T} N^{-1} Σ_i { log x_it(φ) + y_it / x_it(φ) }
//! ```
//!
//! where `x` is the filtered conditional mean of `y` (`h` for squared
//! returns, `μ` for realized measures). Derivatives of `x` follow their own
//! recursion, `∂x_t = g_t + β ∂x_{t-1}`, so the score is exact.

mod equation;
mod fit;
mod sandwich;
mod transform;

pub use equation::{InitRule, QllValue, TargetMoments};
pub use fit::{
    fit_one_step, fit_two_step, sandwich_covariance, Convergence, EquationConvergence, FitConfig, FitMethod, FitResult,
    Kappa2, MomentTargets, QllPair, SandwichCovariance, TwoStepInit, ONE_STEP_INIT, SE_LABEL_ONE_STEP,
    SE_LABEL_TWO_STEP, TWO_STEP_INIT,
};
pub use transform::Layout;

pub(crate) use equation::Equation;
pub(crate) use fit::fit_equation;
pub(crate) use sandwich::{sandwich, std_errors, to_rows};

use crate::error::{invalid, Result};
use crate::model::{EquationParams, Panel, PanelSeries, Regressors};
use crate::network::NormalizedNetwork;

fn free_equation<'a>(y: &'a Panel, reg: &'a Regressors, rule: InitRule) -> Equation<'a> {
    Equation::new(y, reg, rule.initial_values(y), None)
}

fn check(w: &NormalizedNetwork, panel: &PanelSeries) -> Result<()> {
    if w.n() != panel.n() {
        return invalid(format!("network has {} nodes but panel has {} assets", w.n(), panel.n()));
    }
    Ok(())
}

/// Return-equation quasi-likelihood at `phi`.
pub fn qll_returns(
    phi: &EquationParams,
    w: &NormalizedNetwork,
    panel: &PanelSeries,
    rule: InitRule,
) -> Result<QllValue> {
    check(w, panel)?;
    let reg = Regressors::new(w, &panel.rm);
    free_equation(&panel.r2, &reg, rule).qll_checked(&phi.to_array())
}

/// Realized-measure-equation quasi-likelihood at `phi_r`.
pub fn qll_rm(phi_r: &EquationParams, w: &NormalizedNetwork, panel: &PanelSeries, rule: InitRule) -> Result<QllValue> {
    check(w, panel)?;
    let reg = Regressors::new(w, &panel.rm);
    free_equation(&panel.rm, &reg, rule).qll_checked(&phi_r.to_array())
}

fn score_of(eq: &Equation, p: &[f64]) -> Result<Vec<f64>> {
    eq.qll_checked(p)?;
    Ok(eq.value_and_score(p).expect("checked above").1)
}

/// Gradient of [`qll_returns`] in `(ω, α, λ, β)`.
pub fn score_returns(
    phi: &EquationParams,
    w: &NormalizedNetwork,
    panel: &PanelSeries,
    rule: InitRule,
) -> Result<Vec<f64>> {
    check(w, panel)?;
    let reg = Regressors::new(w, &panel.rm);
    score_of(&free_equation(&panel.r2, &reg, rule), &phi.to_array())
}

/// Gradient of [`qll_rm`] in `(ω_R, α_R, λ_R, β_R)`.
pub fn score_rm(
    phi_r: &EquationParams,
    w: &NormalizedNetwork,
    panel: &PanelSeries,
    rule: InitRule,
) -> Result<Vec<f64>> {
    check(w, panel)?;
    let reg = Regressors::new(w, &panel.rm);
    score_of(&free_equation(&panel.rm, &reg, rule), &phi_r.to_array())
}
