//! One multiplicative-error equation `E(y_it | past) = x_it` with
//! `x_it = c_i + α z_{i,t-1} + λ (W z_{t-1})_i + β x_{i,t-1}`.
//!
//! The return and realized-measure equations of the NHEAVY model and the
//! network GARCH comparator are all instances; they differ only in the
//! target `y`, the driver `z` and how the intercept is parameterised.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{head_sum_init, Panel, Regressors, Slopes};

/// Average negative quasi-log-likelihood and its daily terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QllValue {
    /// `T^{-1} Σ_{t≥2} ℓ_t`.
    pub value: f64,
    /// `ℓ_t = N^{-1} Σ_i (log x_it + y_it / x_it)` for days `2..=T`.
    pub per_day: Vec<f64>,
}

/// How the first filtered value of each asset is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRule {
    /// `T^{-1/2} Σ_{t=1}^{⌊√T⌋} y_it`.
    #[default]
    HeadSum,
    /// Full-sample mean of `y_i`.
    SampleMean,
}

impl InitRule {
    pub fn initial_values(self, y: &Panel) -> Vec<f64> {
        match self {
            InitRule::HeadSum => head_sum_init(y),
            InitRule::SampleMean => y.column_means(),
        }
    }
}

/// Moments pinning the intercept: `c_i = b_i − α a_i − λ n_i − β b_i`, with
/// `b` the target mean, `a` the driver mean and `n = W a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMoments {
    pub own: Vec<f64>,
    pub lag: Vec<f64>,
    pub net: Vec<f64>,
}

impl TargetMoments {
    pub fn intercepts(&self, s: Slopes) -> Vec<f64> {
        (0..self.own.len())
            .map(|i| self.own[i] - s.alpha * self.lag[i] - s.lambda * self.net[i] - s.beta * self.own[i])
            .collect()
    }
}

/// Filtered states with their parameter derivatives, days `2..=T` only.
pub(crate) struct Contributions {
    pub k: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Row `j` holds `∂x/∂p` for the `j`-th `(t, i)` pair, length `k` each.
    pub dx: Vec<f64>,
}

pub(crate) struct Equation<'a> {
    pub y: &'a Panel,
    pub reg: &'a Regressors,
    pub init: Vec<f64>,
    pub targets: Option<TargetMoments>,
}

impl<'a> Equation<'a> {
    pub fn new(y: &'a Panel, reg: &'a Regressors, init: Vec<f64>, targets: Option<TargetMoments>) -> Self {
        Self { y, reg, init, targets }
    }

    pub fn dim(&self) -> usize {
        if self.targets.is_some() {
            3
        } else {
            4
        }
    }

    /// Splits a parameter vector into per-asset intercepts and slopes.
    pub fn split(&self, p: &[f64]) -> (Vec<f64>, Slopes) {
        let n = self.y.n();
        match &self.targets {
            None => (vec![p[0]; n], Slopes::new(p[1], p[2], p[3])),
            Some(m) => {
                let s = Slopes::new(p[0], p[1], p[2]);
                (m.intercepts(s), s)
            }
        }
    }

    fn intercept_grad(&self, i: usize, out: &mut [f64]) {
        match &self.targets {
            None => {
                out.fill(0.0);
                out[0] = 1.0;
            }
            Some(m) => {
                out[0] = -m.lag[i];
                out[1] = -m.net[i];
                out[2] = -m.own[i];
            }
        }
    }

    /// Walks the recursion, handing `(t, i, x, dx)` for every day `t ≥ 1` to
    /// `visit`. Returns `false` if an intercept or filtered value is not
    /// strictly positive.
    fn walk(&self, p: &[f64], derivs: bool, mut visit: impl FnMut(usize, usize, f64, &[f64])) -> bool {
        let (c, s) = self.split(p);
        if c.iter().any(|v| !(*v > 0.0)) || self.init.iter().any(|v| !(*v > 0.0)) {
            return false;
        }
        let (t_len, n, k) = (self.y.t_len(), self.y.n(), self.dim());
        let off = k - 3;
        let mut x = self.init.clone();
        let mut dx = vec![0.0; if derivs { n * k } else { 0 }];
        let mut dc = vec![0.0; k];
        let mut cur = vec![0.0; k];
        for t in 1..t_len {
            let (z, wz) = (self.reg.rm.row(t - 1), self.reg.wrm.row(t - 1));
            for i in 0..n {
                let prev = x[i];
                let xi = c[i] + s.alpha * z[i] + s.lambda * wz[i] + s.beta * prev;
                if !(xi > 0.0) || !xi.is_finite() {
                    return false;
                }
                if derivs {
                    self.intercept_grad(i, &mut dc);
                    let d = &mut dx[i * k..(i + 1) * k];
                    for j in 0..k {
                        cur[j] = dc[j] + s.beta * d[j];
                    }
                    cur[off] += z[i];
                    cur[off + 1] += wz[i];
                    cur[off + 2] += prev;
                    d.copy_from_slice(&cur);
                }
                x[i] = xi;
                visit(t, i, xi, if derivs { &dx[i * k..(i + 1) * k] } else { &[] });
            }
        }
        true
    }

    /// Quasi-likelihood value and per-day terms; `None` outside the region.
    pub fn qll(&self, p: &[f64]) -> Option<QllValue> {
        let (t_len, n) = (self.y.t_len(), self.y.n());
        let mut per_day = vec![0.0; t_len.saturating_sub(1)];
        let ok = self.walk(p, false, |t, i, x, _| {
            per_day[t - 1] += x.ln() + self.y.get(t, i) / x;
        });
        if !ok {
            return None;
        }
        per_day.iter_mut().for_each(|v| *v /= n as f64);
        let value = per_day.iter().sum::<f64>() / t_len as f64;
        Some(QllValue { value, per_day })
    }

    /// Quasi-likelihood value and analytic gradient in `p`.
    pub fn value_and_score(&self, p: &[f64]) -> Option<(f64, Vec<f64>)> {
        let k = self.dim();
        let scale = 1.0 / (self.y.n() * self.y.t_len()) as f64;
        let mut value = 0.0;
        let mut grad = vec![0.0; k];
        let ok = self.walk(p, true, |t, i, x, dx| {
            let y = self.y.get(t, i);
            value += x.ln() + y / x;
            let w = (1.0 - y / x) / x;
            for j in 0..k {
                grad[j] += w * dx[j];
            }
        });
        if !ok || !value.is_finite() {
            return None;
        }
        grad.iter_mut().for_each(|g| *g *= scale);
        Some((value * scale, grad))
    }

    pub fn contributions(&self, p: &[f64]) -> Option<Contributions> {
        let k = self.dim();
        let cap = self.y.n() * self.y.t_len().saturating_sub(1);
        let mut out = Contributions {
            k,
            x: Vec::with_capacity(cap),
            y: Vec::with_capacity(cap),
            dx: Vec::with_capacity(cap * k),
        };
        let ok = self.walk(p, true, |t, i, x, dx| {
            out.x.push(x);
            out.y.push(self.y.get(t, i));
            out.dx.extend_from_slice(dx);
        });
        ok.then_some(out)
    }

    /// Like [`Equation::qll`] but reports why a point is rejected.
    pub fn qll_checked(&self, p: &[f64]) -> Result<QllValue> {
        if self.y.t_len() < 2 {
            return Err(Error::InvalidInput(format!("quasi-likelihood needs T >= 2, got {}", self.y.t_len())));
        }
        self.qll(p).ok_or_else(|| {
            Error::Evaluation("filtered values are not strictly positive at the requested parameters".into())
        })
    }
}
