//! One-step and targeting (two-step) quasi-maximum likelihood fits.

use serde::{Deserialize, Serialize};

use super::equation::{Contributions, Equation, InitRule, QllValue, TargetMoments};
use super::sandwich::{sandwich, std_errors, to_rows};
use super::transform::Layout;
use crate::error::{invalid, Error, Result};
use crate::model::{EquationParams, NheavyParams, PanelSeries, Regressors, Slopes, TargetIntercepts};
use crate::network::NormalizedNetwork;
use crate::optim::{minimize, OptimizerConfig};

/// Default one-step starting point.
pub const ONE_STEP_INIT: NheavyParams =
    NheavyParams::new(EquationParams::new(0.005, 0.001, 0.001, 0.9), EquationParams::new(0.005, 0.1, 0.1, 0.5));

/// Default two-step starting point for `(α, λ, β)` and `(α_R, λ_R, β_R)`.
pub const TWO_STEP_INIT: TwoStepInit =
    TwoStepInit { phi: Slopes::new(0.01, 0.001, 0.7), phi_r: Slopes::new(0.001, 0.01, 0.85) };

pub const SE_LABEL_ONE_STEP: &str = "sandwich";
pub const SE_LABEL_TWO_STEP: &str = "moment-plug-in, not HAC-corrected";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoStepInit {
    pub phi: Slopes,
    pub phi_r: Slopes,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub optimizer: OptimizerConfig,
    pub init_rule: InitRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    OneStep,
    TwoStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationConvergence {
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Max-norm of the gradient in optimizer coordinates.
    pub grad_max_norm: f64,
    pub used_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub returns: EquationConvergence,
    pub rm: EquationConvergence,
}

/// First-step moments: `μ̂_i`, `μ̂_Ri` and `κ̂_i = μ̂_Ri / μ̂_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTargets {
    pub mu: Vec<f64>,
    pub mu_r: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl MomentTargets {
    pub fn from_panel(panel: &PanelSeries) -> Result<Self> {
        let mu = panel.r2.column_means();
        let mu_r = panel.rm.column_means();
        if let Some((i, m)) = mu.iter().enumerate().find(|(_, m)| !(**m > 0.0)) {
            return invalid(format!("mean squared return of asset {i} must be positive, got {m}"));
        }
        if let Some((i, m)) = mu_r.iter().enumerate().find(|(_, m)| !(**m > 0.0)) {
            return invalid(format!("mean realized measure of asset {i} must be positive, got {m}"));
        }
        let kappa = mu.iter().zip(&mu_r).map(|(a, b)| b / a).collect();
        Ok(Self { mu, mu_r, kappa })
    }

    fn returns_targets(&self, w: &NormalizedNetwork) -> TargetMoments {
        TargetMoments { own: self.mu.clone(), lag: self.mu_r.clone(), net: w.apply(&self.mu_r) }
    }

    fn rm_targets(&self, w: &NormalizedNetwork) -> TargetMoments {
        TargetMoments { own: self.mu_r.clone(), lag: self.mu_r.clone(), net: w.apply(&self.mu_r) }
    }
}

/// Estimated second moments of the standardized observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa2 {
    pub r: f64,
    pub rm: f64,
    pub cross: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QllPair {
    pub returns: QllValue,
    pub rm: QllValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: FitMethod,
    /// Under targeting the intercepts are the cross-sectional means of the
    /// per-asset values in `intercepts`.
    pub theta_hat: NheavyParams,
    pub qll: QllPair,
    pub param_names: Vec<String>,
    pub cov: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    pub se_label: String,
    pub kappa2: Kappa2,
    pub converged: bool,
    pub iterations: usize,
    pub convergence: Convergence,
    pub moment_targets: Option<MomentTargets>,
    pub intercepts: Option<TargetIntercepts>,
    pub init_rule: InitRule,
    pub warnings: Vec<String>,
}

impl FitResult {
    /// Estimated coordinates in the order of `param_names`.
    pub fn estimates(&self) -> Vec<f64> {
        let (p, r) = (self.theta_hat.phi, self.theta_hat.phi_r);
        match self.method {
            FitMethod::OneStep => self.theta_hat.to_vec(),
            FitMethod::TwoStep => vec![p.alpha, p.lambda, p.beta, r.alpha, r.lambda, r.beta],
        }
    }
}

/// Result of minimising a single equation.
pub(crate) struct EquationFit {
    pub p: Vec<f64>,
    pub qll: QllValue,
    pub convergence: EquationConvergence,
}

/// Minimises one equation's quasi-likelihood starting from `p0`. Slopes are
/// halved until the start is feasible.
pub(crate) fn fit_equation(eq: &Equation, layout: Layout, p0: &[f64], cfg: &OptimizerConfig) -> Result<EquationFit> {
    let objective = |y: &[f64]| {
        let (p, jac) = layout.forward(y);
        eq.value_and_score(&p).map(|(v, g)| (v, Layout::pull_back(&jac, &g)))
    };
    let k = layout.dim();
    let mut start = p0.to_vec();
    let mut y0 = layout.inverse(&start);
    let mut tries = 0;
    while objective(&y0).is_none() {
        tries += 1;
        if tries > 60 {
            return Err(Error::Evaluation(format!("no feasible starting point found from {p0:?}")));
        }
        for v in &mut start[k - 3..] {
            *v *= 0.5;
        }
        y0 = layout.inverse(&start);
    }
    let mut out = minimize(objective, &y0, cfg).ok_or_else(|| Error::Evaluation("infeasible starting point".into()))?;
    // A search that drifts to unit persistence stalls where the transform is
    // flat and reports a tiny gradient. Retry from a moderate interior point
    // and keep whichever optimum is better.
    if layout.saturated(&out.x) {
        let mut alt = start.clone();
        alt[k - 3..].copy_from_slice(&[0.1, 0.1, 0.5]);
        if k == 4 {
            let means = eq.y.column_means();
            alt[0] = 0.3 * means.iter().sum::<f64>() / means.len() as f64;
        }
        let y1 = layout.inverse(&alt);
        if objective(&y1).is_some() {
            if let Some(retry) = minimize(objective, &y1, cfg) {
                if retry.value < out.value {
                    out = retry;
                }
            }
        }
    }
    let (p, _) = layout.forward(&out.x);
    let qll = eq.qll(&p).ok_or_else(|| Error::Evaluation("optimum left the admissible region".into()))?;
    let convergence = EquationConvergence {
        converged: out.converged,
        iterations: out.iterations,
        evaluations: out.evaluations,
        grad_max_norm: out.grad_max_norm(),
        used_fallback: out.used_fallback,
    };
    Ok(EquationFit { p, qll, convergence })
}

fn check_shapes(panel: &PanelSeries, w: &NormalizedNetwork) -> Result<()> {
    if w.n() != panel.n() {
        return invalid(format!("network has {} nodes but panel has {} assets", w.n(), panel.n()));
    }
    if panel.t_len() < 2 {
        return invalid(format!("estimation needs T >= 2, got {}", panel.t_len()));
    }
    Ok(())
}

/// Estimates `(φ, φ_R)` by minimising the two quasi-likelihoods separately.
pub fn fit_one_step(
    panel: &PanelSeries,
    w: &NormalizedNetwork,
    init: Option<&NheavyParams>,
    cfg: &FitConfig,
) -> Result<FitResult> {
    check_shapes(panel, w)?;
    let init = init.copied().unwrap_or(ONE_STEP_INIT);
    init.validate()?;
    let reg = Regressors::new(w, &panel.rm);
    let eq_r = Equation::new(&panel.r2, &reg, cfg.init_rule.initial_values(&panel.r2), None);
    let eq_m = Equation::new(&panel.rm, &reg, cfg.init_rule.initial_values(&panel.rm), None);
    let fr = fit_equation(&eq_r, Layout::FreeBeta, &init.phi.to_array(), &cfg.optimizer)?;
    let fm = fit_equation(&eq_m, Layout::FreeSimplex, &init.phi_r.to_array(), &cfg.optimizer)?;
    let theta_hat = NheavyParams::new(EquationParams::from_slice(&fr.p), EquationParams::from_slice(&fm.p));
    let names = NheavyParams::NAMES.iter().map(|s| s.to_string()).collect();
    assemble(FitMethod::OneStep, theta_hat, names, &eq_r, &eq_m, fr, fm, None, None, panel, cfg.init_rule)
}

/// Targeting fit: intercepts pinned by sample moments, `(α, λ, β)` and
/// `(α_R, λ_R, β_R)` estimated. Points implying a nonpositive intercept are
/// rejected by the search.
pub fn fit_two_step(
    panel: &PanelSeries,
    w: &NormalizedNetwork,
    init: Option<&TwoStepInit>,
    cfg: &FitConfig,
) -> Result<FitResult> {
    check_shapes(panel, w)?;
    let init = init.copied().unwrap_or(TWO_STEP_INIT);
    let moments = MomentTargets::from_panel(panel)?;
    let reg = Regressors::new(w, &panel.rm);
    let eq_r =
        Equation::new(&panel.r2, &reg, cfg.init_rule.initial_values(&panel.r2), Some(moments.returns_targets(w)));
    let eq_m = Equation::new(&panel.rm, &reg, cfg.init_rule.initial_values(&panel.rm), Some(moments.rm_targets(w)));
    let fr = fit_equation(&eq_r, Layout::TargetBeta, &init.phi.to_array(), &cfg.optimizer)?;
    let fm = fit_equation(&eq_m, Layout::TargetSimplex, &init.phi_r.to_array(), &cfg.optimizer)?;
    let (c_r, s_r) = eq_r.split(&fr.p);
    let (c_m, s_m) = eq_m.split(&fm.p);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let theta_hat = NheavyParams::new(s_r.with_omega(mean(&c_r)), s_m.with_omega(mean(&c_m)));
    let names = ["alpha", "lambda", "beta", "alpha_r", "lambda_r", "beta_r"].iter().map(|s| s.to_string()).collect();
    let intercepts = TargetIntercepts { r: c_r, rm: c_m };
    assemble(
        FitMethod::TwoStep,
        theta_hat,
        names,
        &eq_r,
        &eq_m,
        fr,
        fm,
        Some(moments),
        Some(intercepts),
        panel,
        cfg.init_rule,
    )
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    method: FitMethod,
    theta_hat: NheavyParams,
    param_names: Vec<String>,
    eq_r: &Equation,
    eq_m: &Equation,
    fr: EquationFit,
    fm: EquationFit,
    moment_targets: Option<MomentTargets>,
    intercepts: Option<TargetIntercepts>,
    panel: &PanelSeries,
    init_rule: InitRule,
) -> Result<FitResult> {
    let (cr, cm) = contributions_pair(eq_r, eq_m, &fr.p, &fm.p)?;
    let parts = sandwich(&[&cr, &cm], panel.n(), panel.t_len());
    let mut warnings = parts.warnings;
    for (label, c) in [("return", &fr.convergence), ("realized-measure", &fm.convergence)] {
        if !c.converged {
            warnings.push(format!(
                "{label} equation did not converge: gradient max-norm {:.3e} after {} iterations",
                c.grad_max_norm, c.iterations
            ));
        }
    }
    let converged = fr.convergence.converged && fm.convergence.converged;
    let se_label = match method {
        FitMethod::OneStep => SE_LABEL_ONE_STEP,
        FitMethod::TwoStep => SE_LABEL_TWO_STEP,
    };
    Ok(FitResult {
        method,
        theta_hat,
        qll: QllPair { returns: fr.qll, rm: fm.qll },
        param_names,
        std_errors: std_errors(&parts.cov),
        cov: to_rows(&parts.cov),
        se_label: se_label.to_string(),
        kappa2: Kappa2 { r: parts.kappa[(0, 0)], rm: parts.kappa[(1, 1)], cross: parts.kappa[(0, 1)] },
        converged,
        iterations: fr.convergence.iterations + fm.convergence.iterations,
        convergence: Convergence { returns: fr.convergence, rm: fm.convergence },
        moment_targets,
        intercepts,
        init_rule,
        warnings,
    })
}

fn contributions_pair(
    eq_r: &Equation,
    eq_m: &Equation,
    pr: &[f64],
    pm: &[f64],
) -> Result<(Contributions, Contributions)> {
    let bad = || Error::Evaluation("filtered values are not strictly positive at the estimate".into());
    Ok((eq_r.contributions(pr).ok_or_else(bad)?, eq_m.contributions(pm).ok_or_else(bad)?))
}

/// Sandwich covariance recomputed from a fit and its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichCovariance {
    pub param_names: Vec<String>,
    pub cov: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    pub kappa2: Kappa2,
    pub label: String,
    pub warnings: Vec<String>,
}

pub fn sandwich_covariance(fit: &FitResult, panel: &PanelSeries, w: &NormalizedNetwork) -> Result<SandwichCovariance> {
    check_shapes(panel, w)?;
    let reg = Regressors::new(w, &panel.rm);
    let rule = fit.init_rule;
    let (p, r) = (fit.theta_hat.phi, fit.theta_hat.phi_r);
    let (eq_r, eq_m, pr, pm) = match fit.method {
        FitMethod::OneStep => (
            Equation::new(&panel.r2, &reg, rule.initial_values(&panel.r2), None),
            Equation::new(&panel.rm, &reg, rule.initial_values(&panel.rm), None),
            p.to_array().to_vec(),
            r.to_array().to_vec(),
        ),
        FitMethod::TwoStep => {
            let m = match &fit.moment_targets {
                Some(m) => m.clone(),
                None => MomentTargets::from_panel(panel)?,
            };
            (
                Equation::new(&panel.r2, &reg, rule.initial_values(&panel.r2), Some(m.returns_targets(w))),
                Equation::new(&panel.rm, &reg, rule.initial_values(&panel.rm), Some(m.rm_targets(w))),
                p.slopes().to_array().to_vec(),
                r.slopes().to_array().to_vec(),
            )
        }
    };
    let (cr, cm) = contributions_pair(&eq_r, &eq_m, &pr, &pm)?;
    let parts = sandwich(&[&cr, &cm], panel.n(), panel.t_len());
    Ok(SandwichCovariance {
        param_names: fit.param_names.clone(),
        std_errors: std_errors(&parts.cov),
        cov: to_rows(&parts.cov),
        kappa2: Kappa2 { r: parts.kappa[(0, 0)], rm: parts.kappa[(1, 1)], cross: parts.kappa[(0, 1)] },
        label: fit.se_label.clone(),
        warnings: parts.warnings,
    })
}
