//! Maps between unconstrained optimizer coordinates and equation parameters.
//!
//! Free layouts carry `(ω, α, λ, β)`, targeted layouts `(α, λ, β)`. Nonnegative
//! coefficients go through softplus, `β < 1` through the logistic map, and the
//! constraint `α + λ + β < 1` through a softmax with an implicit slack
//! coordinate fixed at zero.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `ω, α, λ > 0`, `0 < β < 1`.
    FreeBeta,
    /// `ω > 0`, `α + λ + β < 1`.
    FreeSimplex,
    /// Targeted: `α, λ > 0`, `0 < β < 1`.
    TargetBeta,
    /// Targeted: `α + λ + β < 1`.
    TargetSimplex,
}

/// Keeps starting points strictly inside the open region.
const INTERIOR: f64 = 1e-8;

/// Logistic and softmax coordinates beyond this imply persistence above 0.997.
const SATURATED: f64 = 6.0;

fn softplus(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp().ln_1p()
    }
}

fn softplus_inv(x: f64) -> f64 {
    let x = x.max(INTERIOR);
    if x > 30.0 {
        x
    } else {
        x + (-(-x).exp()).ln_1p()
    }
}

fn logistic(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

fn logit(x: f64) -> f64 {
    let x = x.clamp(INTERIOR, 1.0 - INTERIOR);
    (x / (1.0 - x)).ln()
}

/// `(α, λ, β)` from three softmax coordinates and the Jacobian rows.
fn simplex_forward(y: &[f64]) -> ([f64; 3], [[f64; 3]; 3]) {
    let m = y.iter().fold(0.0_f64, |m, &v| m.max(v));
    let e: Vec<f64> = y.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = e.iter().sum::<f64>() + (-m).exp();
    let p = [e[0] / total, e[1] / total, e[2] / total];
    let mut jac = [[0.0; 3]; 3];
    for k in 0..3 {
        for j in 0..3 {
            jac[k][j] = p[k] * (if k == j { 1.0 } else { 0.0 } - p[j]);
        }
    }
    (p, jac)
}

fn simplex_inverse(p: &[f64]) -> [f64; 3] {
    let mut q = [p[0].max(INTERIOR), p[1].max(INTERIOR), p[2].max(INTERIOR)];
    let sum: f64 = q.iter().sum();
    if sum > 1.0 - 1e-6 {
        q.iter_mut().for_each(|v| *v *= (1.0 - 1e-6) / sum);
    }
    let slack = 1.0 - q.iter().sum::<f64>();
    [(q[0] / slack).ln(), (q[1] / slack).ln(), (q[2] / slack).ln()]
}

impl Layout {
    pub fn dim(self) -> usize {
        if self.targeted() {
            3
        } else {
            4
        }
    }

    pub fn targeted(self) -> bool {
        matches!(self, Layout::TargetBeta | Layout::TargetSimplex)
    }

    /// Parameters and Jacobian `∂p_k/∂y_j` (row-major, `dim × dim`).
    pub fn forward(self, y: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.dim();
        let mut p = vec![0.0; d];
        let mut jac = vec![vec![0.0; d]; d];
        let off = d - 3;
        if off == 1 {
            p[0] = softplus(y[0]);
            jac[0][0] = logistic(y[0]);
        }
        match self {
            Layout::FreeBeta | Layout::TargetBeta => {
                for k in off..off + 2 {
                    p[k] = softplus(y[k]);
                    jac[k][k] = logistic(y[k]);
                }
                let b = logistic(y[off + 2]);
                p[off + 2] = b;
                jac[off + 2][off + 2] = b * (1.0 - b);
            }
            Layout::FreeSimplex | Layout::TargetSimplex => {
                let (q, jq) = simplex_forward(&y[off..]);
                for k in 0..3 {
                    p[off + k] = q[k];
                    for j in 0..3 {
                        jac[off + k][off + j] = jq[k][j];
                    }
                }
            }
        }
        (p, jac)
    }

    /// Unconstrained coordinates of `p`, pulled slightly inside the region if
    /// `p` sits on its boundary.
    pub fn inverse(self, p: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let off = d - 3;
        let mut y = vec![0.0; d];
        if off == 1 {
            y[0] = softplus_inv(p[0]);
        }
        match self {
            Layout::FreeBeta | Layout::TargetBeta => {
                y[off] = softplus_inv(p[off]);
                y[off + 1] = softplus_inv(p[off + 1]);
                y[off + 2] = logit(p[off + 2]);
            }
            Layout::FreeSimplex | Layout::TargetSimplex => {
                y[off..].copy_from_slice(&simplex_inverse(&p[off..]));
            }
        }
        y
    }

    /// True when the persistence coordinates sit where the logistic or softmax
    /// map is flat, so a small gradient says little about optimality.
    pub fn saturated(self, y: &[f64]) -> bool {
        let off = self.dim() - 3;
        match self {
            Layout::FreeBeta | Layout::TargetBeta => y[off + 2] > SATURATED,
            Layout::FreeSimplex | Layout::TargetSimplex => y[off..].iter().any(|v| *v > SATURATED),
        }
    }

    /// Chain rule: gradient in `y` from a gradient in `p`.
    pub fn pull_back(jac: &[Vec<f64>], grad_p: &[f64]) -> Vec<f64> {
        let d = grad_p.len();
        (0..d).map(|j| (0..d).map(|k| jac[k][j] * grad_p[k]).sum()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let cases = [
            (Layout::FreeBeta, vec![0.3, 0.2, 1.5, 0.7]),
            (Layout::FreeSimplex, vec![0.01, 0.2, 0.1, 0.6]),
            (Layout::TargetBeta, vec![0.05, 0.0001, 0.95]),
            (Layout::TargetSimplex, vec![0.3, 0.3, 0.3]),
        ];
        for (layout, p) in cases {
            let (back, _) = layout.forward(&layout.inverse(&p));
            for (a, b) in p.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()), "{layout:?}: {p:?} vs {back:?}");
            }
        }
    }

    #[test]
    fn jacobian_matches_differences() {
        for layout in [Layout::FreeBeta, Layout::FreeSimplex, Layout::TargetBeta, Layout::TargetSimplex] {
            let y: Vec<f64> = (0..layout.dim()).map(|k| 0.3 * k as f64 - 0.5).collect();
            let (_, jac) = layout.forward(&y);
            for j in 0..y.len() {
                let (mut up, mut dn) = (y.clone(), y.clone());
                up[j] += 1e-6;
                dn[j] -= 1e-6;
                let (pu, _) = layout.forward(&up);
                let (pd, _) = layout.forward(&dn);
                for k in 0..y.len() {
                    let fd = (pu[k] - pd[k]) / 2e-6;
                    assert!((fd - jac[k][j]).abs() < 1e-8, "{layout:?} d{k}/d{j}");
                }
            }
        }
    }

    #[test]
    fn boundary_points_are_pulled_inside() {
        let y = Layout::FreeSimplex.inverse(&[0.0, 0.5, 0.0, 0.5]);
        let (p, _) = Layout::FreeSimplex.forward(&y);
        assert!(p.iter().all(|v| *v > 0.0));
        assert!(p[1] + p[2] + p[3] < 1.0);
    }
}
