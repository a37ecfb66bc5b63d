//! Monte Carlo parameter-recovery harness: network → data → fit, repeated.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{fit_one_step, fit_two_step, FitConfig, FitMethod, FitResult};
use crate::model::{fmt_f64, simulate_nheavy_with, InnovationSpec, NheavyParams, PanelSeries, DEFAULT_BURN_IN};
use crate::network::{density, normalize, NetworkKind};
use crate::realized::{simulate_pipeline_with, PipelineSpec};
use crate::rng::{purpose, replication_rng};

/// How each replication's panel is generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dgp {
    /// Intraday diffusion with noise and a realized-measure estimator.
    Pipeline(PipelineSpec),
    /// Daily multiplicative-error model with the given innovations.
    Direct {
        #[serde(default)]
        innovations: InnovationSpec,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
    },
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmseDesign {
    pub generator: NetworkKind,
    pub n: usize,
    pub t_len: usize,
    pub theta0: NheavyParams,
    pub q_reps: usize,
    pub method: FitMethod,
    pub dgp: Dgp,
    #[serde(default)]
    pub fit: FitConfig,
    /// Draw a fresh network for every replication.
    #[serde(default = "yes")]
    pub redraw_network: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub theta0: f64,
    pub mean: f64,
    pub rmse: f64,
    /// Monte Carlo standard error of `mean`.
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub converged: bool,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseTable {
    pub design: RmseDesign,
    pub seed: u64,
    /// Replications entering the summaries.
    pub q_used: usize,
    /// Replications whose fit returned an error.
    pub failures: usize,
    /// Replications whose fit did not meet the convergence criterion; they
    /// are excluded from the summaries too.
    pub nonconverged: usize,
    pub nd_mean: f64,
    pub nd_analytic: f64,
    pub parameters: Vec<ParameterSummary>,
    /// Successful replications in order; `None` marks a fit error.
    pub replications: Vec<Option<Replication>>,
}

/// Per-coordinate `{Q^{-1} Σ_q (θ̂_q − θ₀)²}^{1/2}`.
pub fn rmse(estimates: &[Vec<f64>], truth: &[f64]) -> Vec<f64> {
    let q = estimates.len() as f64;
    (0..truth.len()).map(|k| (estimates.iter().map(|e| (e[k] - truth[k]).powi(2)).sum::<f64>() / q).sqrt()).collect()
}

fn truth_of(theta0: &NheavyParams, method: FitMethod) -> (Vec<f64>, Vec<&'static str>) {
    match method {
        FitMethod::OneStep => (theta0.to_vec(), NheavyParams::NAMES.to_vec()),
        FitMethod::TwoStep => {
            let (p, r) = (theta0.phi, theta0.phi_r);
            (
                vec![p.alpha, p.lambda, p.beta, r.alpha, r.lambda, r.beta],
                vec!["alpha", "lambda", "beta", "alpha_r", "lambda_r", "beta_r"],
            )
        }
    }
}

fn simulate(design: &RmseDesign, seed: u64, q: u64) -> Result<(PanelSeries, crate::network::NormalizedNetwork, f64)> {
    let net_rep = if design.redraw_network { q } else { 0 };
    let a = design.generator.generate_with(design.n, &mut replication_rng(seed, net_rep, purpose::NETWORK))?;
    let nd = density(&a)?;
    let w = normalize(&a);
    let panel = match design.dgp {
        Dgp::Pipeline(spec) => {
            let mut rng = replication_rng(seed, q, purpose::DIFFUSION);
            simulate_pipeline_with(&design.theta0, &w, design.t_len, &spec, &mut rng)?.panel
        }
        Dgp::Direct { innovations, burn_in } => {
            let mut rng = replication_rng(seed, q, purpose::INNOVATIONS);
            simulate_nheavy_with(&design.theta0, &w, design.t_len, &innovations, burn_in, &mut rng)?.panel
        }
    };
    Ok((panel, w, nd))
}

fn fit(design: &RmseDesign, panel: &PanelSeries, w: &crate::network::NormalizedNetwork) -> Result<FitResult> {
    match design.method {
        FitMethod::OneStep => fit_one_step(panel, w, None, &design.fit),
        FitMethod::TwoStep => fit_two_step(panel, w, None, &design.fit),
    }
}

/// Runs `q_reps` replications in parallel and summarises them. Simulation
/// errors (an invalid design) abort the run; fit errors are counted.
pub fn rmse_harness(design: &RmseDesign, seed: u64) -> Result<RmseTable> {
    if design.q_reps == 0 {
        return invalid("q_reps must be at least 1");
    }
    let nd_analytic = design.generator.expected_density(design.n)?;
    let results: Vec<Result<Option<Replication>>> = (0..design.q_reps as u64)
        .into_par_iter()
        .map(|q| {
            let (panel, w, nd) = simulate(design, seed, q)?;
            Ok(fit(design, &panel, &w).ok().map(|f| Replication {
                estimates: f.estimates(),
                std_errors: f.std_errors.clone(),
                converged: f.converged,
                density: nd,
            }))
        })
        .collect();
    let replications = results.into_iter().collect::<Result<Vec<_>>>()?;
    let failures = replications.iter().filter(|r| r.is_none()).count();
    let used: Vec<&Replication> = replications.iter().flatten().filter(|r| r.converged).collect();
    let nonconverged = design.q_reps - failures - used.len();
    let (truth, names) = truth_of(&design.theta0, design.method);
    let nd_all: Vec<f64> = replications.iter().flatten().map(|r| r.density).collect();
    let nd_mean = nd_all.iter().sum::<f64>() / nd_all.len().max(1) as f64;
    if used.is_empty() {
        return Err(Error::Evaluation(format!(
            "no usable replication: {failures} fit errors, {nonconverged} not converged"
        )));
    }
    let est: Vec<Vec<f64>> = used.iter().map(|r| r.estimates.clone()).collect();
    let errs = rmse(&est, &truth);
    let q = est.len() as f64;
    let parameters = (0..truth.len())
        .map(|k| {
            let mean = est.iter().map(|e| e[k]).sum::<f64>() / q;
            let var =
                if est.len() > 1 { est.iter().map(|e| (e[k] - mean).powi(2)).sum::<f64>() / (q - 1.0) } else { 0.0 };
            ParameterSummary {
                name: names[k].to_string(),
                theta0: truth[k],
                mean,
                rmse: errs[k],
                mc_se: (var / q).sqrt(),
            }
        })
        .collect();
    Ok(RmseTable {
        design: *design,
        seed,
        q_used: used.len(),
        failures,
        nonconverged,
        nd_mean,
        nd_analytic,
        parameters,
        replications,
    })
}

/// One row per parameter:
/// `method,n,t_len,q_used,failures,nonconverged,nd_mean,nd_analytic,parameter,theta0,mean,rmse,mc_se`.
pub fn write_rmse_csv<W: Write>(table: &RmseTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::from(e);
    w.write_record([
        "method",
        "n",
        "t_len",
        "q_used",
        "failures",
        "nonconverged",
        "nd_mean",
        "nd_analytic",
        "parameter",
        "theta0",
        "mean",
        "rmse",
        "mc_se",
    ])
    .map_err(io)?;
    let method = match table.design.method {
        FitMethod::OneStep => "one_step",
        FitMethod::TwoStep => "two_step",
    };
    for p in &table.parameters {
        w.write_record([
            method.to_string(),
            table.design.n.to_string(),
            table.design.t_len.to_string(),
            table.q_used.to_string(),
            table.failures.to_string(),
            table.nonconverged.to_string(),
            fmt_f64(table.nd_mean),
            fmt_f64(table.nd_analytic),
            p.name.clone(),
            fmt_f64(p.theta0),
            fmt_f64(p.mean),
            fmt_f64(p.rmse),
            fmt_f64(p.mc_se),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EquationParams;

    #[test]
    fn rmse_is_zero_at_truth() {
        let truth = vec![0.1, 0.2];
        assert_eq!(rmse(&[truth.clone(), truth.clone()], &truth), vec![0.0, 0.0]);
        let r = rmse(&[vec![0.0, 0.2], vec![0.2, 0.2]], &truth);
        assert!((r[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn design_json_and_reproducibility() {
        let design = RmseDesign {
            generator: NetworkKind::Sbm { k: 2 },
            n: 6,
            t_len: 60,
            theta0: NheavyParams::new(EquationParams::new(0.1, 0.3, 0.2, 0.4), EquationParams::new(0.1, 0.3, 0.2, 0.3)),
            q_reps: 4,
            method: FitMethod::TwoStep,
            dgp: Dgp::Direct { innovations: InnovationSpec::default(), burn_in: 50 },
            fit: FitConfig::default(),
            redraw_network: true,
        };
        let text = serde_json::to_string(&design).unwrap();
        let back: RmseDesign = serde_json::from_str(&text).unwrap();
        assert_eq!(back, design);
        let a = rmse_harness(&design, 3).unwrap();
        let b = rmse_harness(&design, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.parameters.len(), 6);
        let mut buf = Vec::new();
        write_rmse_csv(&a, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
    }

    #[test]
    fn pipeline_dgp_json() {
        let d: Dgp = serde_json::from_str(r#"{"kind":"pipeline","m_ticks":78}"#).unwrap();
        assert!(matches!(d, Dgp::Pipeline(PipelineSpec { m_ticks: 78, .. })));
        assert!(serde_json::from_str::<Dgp>(r#"{"kind":"pipeline","bogus":1}"#).is_err());
    }
}
