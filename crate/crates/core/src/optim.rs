//! Small-dimension unconstrained minimisation.
//!
//! Objectives work on an unconstrained vector; constrained parameters are
//! mapped in by the caller. An objective may report a point as infeasible
//! (`None`), which both methods treat as `+∞`.
//!
//! [`minimize`] runs BFGS with a backtracking Armijo search and falls back to
//! Nelder-Mead followed by a second BFGS pass when the gradient criterion is
//! not met.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    /// Max-norm of the gradient that counts as converged.
    pub grad_tol: f64,
    pub nelder_mead_fallback: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { max_iter: 500, grad_tol: 1e-6, nelder_mead_fallback: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub used_fallback: bool,
}

impl OptimOutcome {
    pub fn grad_max_norm(&self) -> f64 {
        max_norm(&self.grad)
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS, then Nelder-Mead and another BFGS pass if needed.
pub fn minimize<F>(mut f: F, x0: &[f64], cfg: &OptimizerConfig) -> Option<OptimOutcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let first = bfgs(&mut f, x0, cfg)?;
    if first.converged || !cfg.nelder_mead_fallback {
        return Some(first);
    }
    let mut evals = first.evaluations;
    let (x_nm, _, nm_iters, nm_evals) =
        nelder_mead(|x| f(x).map_or(f64::INFINITY, |(v, _)| v), &first.x, 0.5, cfg.max_iter * 4, 1e-14);
    evals += nm_evals;
    let second = bfgs(&mut f, &x_nm, cfg)?;
    let best = if second.value <= first.value || second.converged { second } else { first.clone() };
    Some(OptimOutcome {
        iterations: first.iterations + nm_iters + best.iterations,
        evaluations: evals + best.evaluations,
        used_fallback: true,
        ..best
    })
}

/// BFGS on the inverse Hessian. Returns `None` when `x0` is infeasible.
pub fn bfgs<F>(f: &mut F, x0: &[f64], cfg: &OptimizerConfig) -> Option<OptimOutcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x)?;
    let mut evals = 1;
    let mut hinv = identity(d);
    let mut scaled = false;
    let mut iter = 0;
    let mut restarts = 0;
    while iter < cfg.max_iter && max_norm(&g) >= cfg.grad_tol {
        iter += 1;
        let mut p: Vec<f64> = (0..d).map(|i| -dot(&hinv[i], &g)).collect();
        let mut slope = dot(&p, &g);
        if !(slope < 0.0) {
            hinv = identity(d);
            p = g.iter().map(|v| -v).collect();
            slope = dot(&p, &g);
        }
        // Keep trial steps bounded in the unconstrained coordinates.
        let len = max_norm(&p);
        if len > 5.0 {
            p.iter_mut().for_each(|v| *v *= 5.0 / len);
            slope *= 5.0 / len;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            evals += 1;
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if restarts < 2 && !is_identity(&hinv) {
                restarts += 1;
                hinv = identity(d);
                scaled = false;
                continue;
            }
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if !scaled {
                let gamma = sy / dot(&y, &y);
                hinv = identity(d);
                hinv.iter_mut().enumerate().for_each(|(i, row)| row[i] = gamma);
                scaled = true;
            }
            let hy: Vec<f64> = (0..d).map(|i| dot(&hinv[i], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..d {
                for j in 0..d {
                    hinv[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        x = xn;
        fx = fnew;
        g = gn;
    }
    let converged = max_norm(&g) < cfg.grad_tol;
    Some(OptimOutcome { x, value: fx, grad: g, iterations: iter, evaluations: evals, converged, used_fallback: false })
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn is_identity(m: &[Vec<f64>]) -> bool {
    m.iter().enumerate().all(|(i, row)| row.iter().enumerate().all(|(j, &v)| v == if i == j { 1.0 } else { 0.0 }))
}

/// Nelder-Mead with standard coefficients (1, 2, 0.5, 0.5).
///
/// Returns `(x, f(x), iterations, evaluations)`. Stops when the spread of
/// simplex values falls below `ftol` or after `max_iter` iterations.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: f64, max_iter: usize, ftol: f64) -> (Vec<f64>, f64, usize, usize)
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = f(&x);
        simplex.push((x, v));
    }
    let mut evals = d + 1;
    let mut iter = 0;
    while iter < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[d].1);
        if worst.is_finite() && (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            break;
        }
        iter += 1;
        let centroid: Vec<f64> =
            (0..d).map(|k| simplex[..d].iter().map(|(x, _)| x[k]).sum::<f64>() / d as f64).collect();
        let towards =
            |t: f64, from: &[f64]| -> Vec<f64> { centroid.iter().zip(from).map(|(c, w)| c + t * (w - c)).collect() };
        let xr = towards(-1.0, &simplex[d].0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = towards(-2.0, &simplex[d].0);
            let fe = f(&xe);
            evals += 1;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[d].1 {
                let xc = towards(-0.5, &simplex[d].0);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = towards(0.5, &simplex[d].0);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for k in 0..d {
                        x[k] = x_best[k] + 0.5 * (x[k] - x_best[k]);
                    }
                    *v = f(x);
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v, iter, evals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Some((v, g))
    }

    #[test]
    fn bfgs_solves_rosenbrock() {
        let out = minimize(rosenbrock, &[-1.2, 1.0], &OptimizerConfig::default()).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn nelder_mead_solves_quadratic() {
        let (x, v, _, _) =
            nelder_mead(|x| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2), &[0.0, 0.0], 1.0, 2000, 1e-16);
        assert!(v < 1e-12);
        assert!((x[0] - 3.0).abs() < 1e-5 && (x[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn infeasible_region_is_avoided() {
        // Minimum of the quadratic lies in the infeasible half-plane x0 > 1.
        let f = |x: &[f64]| {
            if x[0] >= 1.0 {
                None
            } else {
                Some(((x[0] - 2.0).powi(2) + x[1].powi(2), vec![2.0 * (x[0] - 2.0), 2.0 * x[1]]))
            }
        };
        let out = minimize(f, &[0.0, 1.0], &OptimizerConfig { max_iter: 50, ..Default::default() }).unwrap();
        assert!(out.x[0] < 1.0 && out.x[0] > 0.99);
        assert!(!out.converged);
        assert!(minimize(f, &[1.5, 0.0], &OptimizerConfig::default()).is_none());
    }
}
