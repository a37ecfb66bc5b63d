//! Stacked `(h, μ)` dynamics, closed-form matrix powers and forecasts.
//!
//! Writing `x_t = (h_t, μ_t)`, both recursions become
//! `x_t = w + B x_{t-1} + (noise driven by RM_{t-1} - μ_{t-1})` with
//!
//! ```text
//! B = | β I   V1 |      V1 = α I + λ W
//!     | 0     V2 |      V2 = (α_R + β_R) I + λ_R W
//! ```
//!
//! Because `B` is block upper-triangular its powers have the closed form
//! `B^J = [β^J I, V1 S_J; 0, V2^J]` with `S_J = Σ_{k=0}^{J-1} V2^{J-1-k} β^k`,
//! which only needs `N × N` products.

use nalgebra::{DMatrix, DVector, Schur};
use serde::{Deserialize, Serialize};

use super::params::{NheavyParams, Slopes};
use crate::error::{invalid, Result};
use crate::network::NormalizedNetwork;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockDynamics {
    /// Stacked intercepts `(ω 1_N, ω_R 1_N)`.
    pub w_vec: DVector<f64>,
    /// Full `2N × 2N` matrix `B`.
    pub b_mat: DMatrix<f64>,
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
    pub beta: f64,
}

impl BlockDynamics {
    pub fn n(&self) -> usize {
        self.v1.nrows()
    }
}

pub fn build_block_dynamics(params: &NheavyParams, w: &NormalizedNetwork) -> BlockDynamics {
    let n = w.n();
    block_dynamics_with_intercepts(
        params.phi.slopes(),
        params.phi_r.slopes(),
        &vec![params.phi.omega; n],
        &vec![params.phi_r.omega; n],
        w,
    )
}

/// Same layout with per-asset intercepts, as produced by targeting.
pub fn block_dynamics_with_intercepts(
    phi: Slopes,
    phi_r: Slopes,
    c_r: &[f64],
    c_rm: &[f64],
    w: &NormalizedNetwork,
) -> BlockDynamics {
    let n = w.n();
    let wd = w.to_dense();
    let id = DMatrix::<f64>::identity(n, n);
    let v1 = &id * phi.alpha + &wd * phi.lambda;
    let v2 = &id * (phi_r.alpha + phi_r.beta) + &wd * phi_r.lambda;
    let mut b = DMatrix::zeros(2 * n, 2 * n);
    b.view_mut((0, 0), (n, n)).copy_from(&(&id * phi.beta));
    b.view_mut((0, n), (n, n)).copy_from(&v1);
    b.view_mut((n, n), (n, n)).copy_from(&v2);
    let w_vec = DVector::from_iterator(2 * n, c_r.iter().chain(c_rm).copied());
    BlockDynamics { w_vec, b_mat: b, v1, v2, beta: phi.beta }
}

/// Upper block-triangular `2N × 2N` matrix `[a I, tr; 0, br]`.
#[derive(Debug, Clone)]
struct UpperBlocks {
    diag: f64,
    tr: DMatrix<f64>,
    br: DMatrix<f64>,
}

impl UpperBlocks {
    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.br.nrows();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).fill_diagonal(self.diag);
        m.view_mut((0, n), (n, n)).copy_from(&self.tr);
        m.view_mut((n, n), (n, n)).copy_from(&self.br);
        m
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.br.nrows();
        let (top, bottom) = (x.rows(0, n), x.rows(n, n));
        let mut y = DVector::zeros(2 * n);
        y.rows_mut(0, n).copy_from(&(top * self.diag + &self.tr * bottom));
        y.rows_mut(n, n).copy_from(&(&self.br * bottom));
        y
    }
}

/// Walks `J = 0, 1, ..., max_j`, handing `(J, S_J, V2^J, β^J)` to `visit`.
fn walk_powers(dy: &BlockDynamics, max_j: usize, mut visit: impl FnMut(usize, &DMatrix<f64>, &DMatrix<f64>, f64)) {
    let n = dy.n();
    let mut s = DMatrix::zeros(n, n);
    let mut v2_pow = DMatrix::identity(n, n);
    let mut beta_pow = 1.0;
    visit(0, &s, &v2_pow, beta_pow);
    for j in 1..=max_j {
        // S_j = V2 S_{j-1} + β^{j-1} I
        s = &dy.v2 * &s;
        for k in 0..n {
            s[(k, k)] += beta_pow;
        }
        v2_pow = &dy.v2 * &v2_pow;
        beta_pow *= dy.beta;
        visit(j, &s, &v2_pow, beta_pow);
    }
}

fn power_blocks(dy: &BlockDynamics, j: usize) -> UpperBlocks {
    let n = dy.n();
    let mut out = UpperBlocks { diag: 1.0, tr: DMatrix::zeros(n, n), br: DMatrix::identity(n, n) };
    walk_powers(dy, j, |k, s, v2p, bp| {
        if k == j {
            out = UpperBlocks { diag: bp, tr: &dy.v1 * s, br: v2p.clone() };
        }
    });
    out
}

/// `B^j` from the closed-form blocks; `j = 0` gives the identity.
pub fn b_power(dy: &BlockDynamics, j: usize) -> DMatrix<f64> {
    power_blocks(dy, j).to_dense()
}

/// Outcome of [`check_stationarity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub stationary: bool,
    /// Gershgorin bound `max(β, α_R + λ_R + β_R)`.
    pub bound: f64,
    pub spectral_radius: f64,
}

pub fn check_stationarity(params: &NheavyParams, w: &NormalizedNetwork) -> StationarityReport {
    let dy = build_block_dynamics(params, w);
    let phr = params.phi_r;
    let bound = params.phi.beta.max(phr.alpha + phr.lambda + phr.beta);
    let radius = spectral_radius(&dy.b_mat);
    StationarityReport { stationary: radius < 1.0, bound, spectral_radius: radius }
}

/// Largest eigenvalue modulus.
///
/// The real Schur iteration is capped because it can cycle on the highly
/// symmetric matrices produced by block networks; when the cap is hit the
/// radius comes from Gelfand's formula `ρ = lim ‖M^k‖^{1/k}` evaluated by
/// repeated squaring.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    match Schur::try_new(m.clone(), f64::EPSILON, 100 * n) {
        Some(s) => s.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max),
        None => gelfand_radius(m),
    }
}

fn gelfand_radius(m: &DMatrix<f64>) -> f64 {
    // M^k = e^{log_norm} P with ‖P‖ = 1, k = 2^j.
    let mut p = m.clone();
    let mut log_norm = 0.0;
    let mut k = 1.0;
    for _ in 0..48 {
        let nrm = p.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        p /= nrm;
        log_norm += nrm.ln();
        p = &p * &p;
        log_norm *= 2.0;
        k *= 2.0;
    }
    let nrm = p.norm();
    if nrm == 0.0 {
        return 0.0;
    }
    ((log_norm + nrm.ln()) / k).exp()
}

/// Multistep forecast output.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub h: Vec<f64>,
    pub mu: Vec<f64>,
    /// False when the dynamics have spectral radius >= 1; the numbers are
    /// still computed.
    pub stationary: bool,
}

/// `(I + B + ... + B^s) w + B^{s+1} (h_last, μ_last)`.
///
/// With `(h_last, μ_last)` the states of the conditioning day, this is the
/// forecast `s + 1` days ahead of it; `s = 0` is one application of
/// `x ↦ w + B x`.
pub fn forecast(
    params: &NheavyParams,
    w: &NormalizedNetwork,
    h_last: &[f64],
    mu_last: &[f64],
    s: usize,
) -> Result<Forecast> {
    forecast_with_dynamics(&build_block_dynamics(params, w), h_last, mu_last, s)
}

pub fn forecast_with_dynamics(dy: &BlockDynamics, h_last: &[f64], mu_last: &[f64], s: usize) -> Result<Forecast> {
    let n = dy.n();
    if h_last.len() != n || mu_last.len() != n {
        return invalid(format!("state vectors must have length {n}"));
    }
    if h_last.iter().chain(mu_last).any(|v| !(*v > 0.0)) {
        return invalid("forecast states must be strictly positive");
    }
    let stationary = spectral_radius(&dy.b_mat) < 1.0;
    let x = DVector::from_iterator(2 * n, h_last.iter().chain(mu_last).copied());
    // Σ_{k=0}^{s} B^k in block form alongside B^{s+1}.
    let mut sum = UpperBlocks { diag: 0.0, tr: DMatrix::zeros(n, n), br: DMatrix::zeros(n, n) };
    let mut next = None;
    walk_powers(dy, s + 1, |k, sk, v2p, bp| {
        let tr = &dy.v1 * sk;
        if k <= s {
            sum.diag += bp;
            sum.tr += &tr;
            sum.br += v2p;
        } else {
            next = Some(UpperBlocks { diag: bp, tr, br: v2p.clone() });
        }
    });
    let y = sum.apply(&dy.w_vec) + next.expect("walk reaches s+1").apply(&x);
    Ok(Forecast { h: y.rows(0, n).iter().copied().collect(), mu: y.rows(n, n).iter().copied().collect(), stationary })
}

/// Long-run level `(I - B)^{-1} w` of a stationary system.
pub fn unconditional_mean(params: &NheavyParams, w: &NormalizedNetwork) -> Result<(Vec<f64>, Vec<f64>)> {
    let dy = build_block_dynamics(params, w);
    let n = dy.n();
    let m = DMatrix::identity(2 * n, 2 * n) - &dy.b_mat;
    let x = m.lu().solve(&dy.w_vec).ok_or_else(|| crate::Error::InvalidInput("I - B is singular".into()))?;
    Ok((x.rows(0, n).iter().copied().collect(), x.rows(n, n).iter().copied().collect()))
}

/// Per-asset intercepts implied by unconditional moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetIntercepts {
    pub r: Vec<f64>,
    pub rm: Vec<f64>,
}

/// Intercepts that make `mu_bar` (squared returns) and `mu_r_bar` (realized
/// measures) the unconditional means:
///
/// ```text
/// c_i   = (1 - α κ_i - β) μ_i - λ (W μ_R)_i,   κ_i = μ_Ri / μ_i
/// c_R,i = (1 - α_R - β_R) μ_Ri - λ_R (W μ_R)_i
/// ```
pub fn targeting_intercepts(
    phi: Slopes,
    phi_r: Slopes,
    w: &NormalizedNetwork,
    mu_bar: &[f64],
    mu_r_bar: &[f64],
) -> Result<TargetIntercepts> {
    let n = w.n();
    if mu_bar.len() != n || mu_r_bar.len() != n {
        return invalid(format!("moment vectors must have length {n}"));
    }
    if let Some((i, m)) = mu_bar.iter().enumerate().find(|(_, m)| !(**m > 0.0)) {
        return invalid(format!("mean squared return of asset {i} must be positive, got {m}"));
    }
    let wmr = w.apply(mu_r_bar);
    let r = (0..n)
        .map(|i| {
            let kappa = mu_r_bar[i] / mu_bar[i];
            (1.0 - phi.alpha * kappa - phi.beta) * mu_bar[i] - phi.lambda * wmr[i]
        })
        .collect();
    let rm = (0..n).map(|i| (1.0 - phi_r.alpha - phi_r.beta) * mu_r_bar[i] - phi_r.lambda * wmr[i]).collect();
    Ok(TargetIntercepts { r, rm })
}
