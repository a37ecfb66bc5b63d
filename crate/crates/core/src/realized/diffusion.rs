//! Euler scheme for `dX = σᵀ dB` with spot covariance
//! `γ_ij = √(τ_i τ_j) κ^{|i−j|}` and additive Gaussian tick noise.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::IntradayPanel;
use crate::error::{invalid, Result};
use crate::model::Panel;
use crate::rng::{stream_rng, SimRng};

/// Constant-volatility diffusion. Drift is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSpec {
    /// Daily variance of each asset.
    pub tau: Vec<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
}

fn default_kappa() -> f64 {
    0.5
}

fn default_noise_sd() -> f64 {
    0.001
}

impl DiffusionSpec {
    /// `τ_i ~ U(0, 1)`, default `κ` and noise level.
    pub fn draw(n: usize, rng: &mut SimRng) -> Self {
        let tau = (0..n)
            .map(|_| loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break u;
                }
            })
            .collect();
        Self { tau, kappa: default_kappa(), noise_sd: default_noise_sd() }
    }

    pub fn n(&self) -> usize {
        self.tau.len()
    }

    pub fn gamma(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| (self.tau[i] * self.tau[j]).sqrt() * self.kappa.powi(i.abs_diff(j) as i32))
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau.is_empty() {
            return invalid("diffusion needs at least one asset");
        }
        if let Some(t) = self.tau.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return invalid(format!("tau must be finite and >= 0, got {t}"));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return invalid(format!("noise_sd must be >= 0, got {}", self.noise_sd));
        }
        if !self.kappa.is_finite() {
            return invalid("kappa must be finite");
        }
        Ok(())
    }

    /// Cholesky factor of the correlation `κ^{|i−j|}`.
    pub(crate) fn correlation_factor(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        let corr = DMatrix::from_fn(n, n, |i, j| self.kappa.powi(i.abs_diff(j) as i32));
        match corr.cholesky() {
            Some(c) => Ok(c.l()),
            None => invalid(format!("spot covariance is not positive definite for kappa = {}", self.kappa)),
        }
    }
}

/// Noiseless log prices on `l_days × m_ticks`, starting from zero.
pub fn simulate_diffusion(spec: &DiffusionSpec, l_days: usize, m_ticks: usize, seed: u64) -> Result<IntradayPanel> {
    simulate_diffusion_with(spec, l_days, m_ticks, None, &mut stream_rng(seed, 0))
}

/// As [`simulate_diffusion`], with an optional `L × N` path of daily
/// variances replacing `τ` day by day.
pub fn simulate_diffusion_with(
    spec: &DiffusionSpec,
    l_days: usize,
    m_ticks: usize,
    tau_path: Option<&Panel>,
    rng: &mut SimRng,
) -> Result<IntradayPanel> {
    spec.validate()?;
    let n = spec.n();
    if m_ticks == 0 {
        return invalid("m_ticks must be positive");
    }
    if let Some(p) = tau_path {
        if p.t_len() != l_days || p.n() != n {
            return invalid(format!("variance path must be {l_days}x{n}"));
        }
        if p.as_slice().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return invalid("variance path must be finite and >= 0");
        }
    }
    let chol = spec.correlation_factor()?;
    let start = vec![0.0; n];
    let mut logp = Vec::with_capacity(l_days * m_ticks * n);
    let mut x = start.clone();
    let mut sd = vec![0.0; n];
    let mut z = vec![0.0; n];
    let dt_sqrt = (1.0 / m_ticks as f64).sqrt();
    for l in 0..l_days {
        let tau = tau_path.map_or(spec.tau.as_slice(), |p| p.row(l));
        for i in 0..n {
            sd[i] = tau[i].sqrt() * dt_sqrt;
        }
        for _ in 0..m_ticks {
            z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            step(&chol, &sd, &z, &mut x);
            logp.extend_from_slice(&x);
        }
    }
    IntradayPanel::new(l_days, m_ticks, n, start, logp)
}

/// `x += diag(sd) L z`.
pub(crate) fn step(chol: &DMatrix<f64>, sd: &[f64], z: &[f64], x: &mut [f64]) {
    for i in 0..x.len() {
        let mut acc = 0.0;
        for j in 0..=i {
            acc += chol[(i, j)] * z[j];
        }
        x[i] += sd[i] * acc;
    }
}

/// `Y = X + ξ`, `ξ ~ N(0, noise_sd²)` independently per tick and asset. The
/// start price is left untouched.
pub fn add_noise(panel: &IntradayPanel, noise_sd: f64, seed: u64) -> Result<IntradayPanel> {
    add_noise_with(panel, noise_sd, &mut stream_rng(seed, 0))
}

pub fn add_noise_with(panel: &IntradayPanel, noise_sd: f64, rng: &mut SimRng) -> Result<IntradayPanel> {
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return invalid(format!("noise_sd must be >= 0, got {noise_sd}"));
    }
    let mut out = panel.clone();
    if noise_sd > 0.0 {
        for v in &mut out.logp {
            let e: f64 = rng.sample(StandardNormal);
            *v += noise_sd * e;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_layout_and_cholesky() {
        let spec = DiffusionSpec { tau: vec![0.25, 1.0, 0.04], kappa: 0.5, noise_sd: 0.0 };
        let g = spec.gamma();
        assert!((g[(0, 1)] - 0.5 * 0.5).abs() < 1e-15);
        assert!((g[(0, 2)] - 0.1 * 0.25).abs() < 1e-15);
        assert!(spec.correlation_factor().is_ok());
        let bad = DiffusionSpec { kappa: 1.0, ..spec };
        assert!(bad.correlation_factor().is_err());
    }

    #[test]
    fn zero_volatility_gives_constant_paths() {
        let spec = DiffusionSpec { tau: vec![0.0, 0.0], kappa: 0.5, noise_sd: 0.0 };
        let p = simulate_diffusion(&spec, 3, 10, 1).unwrap();
        assert!(p.logp.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn noise_is_identity_at_zero_and_deterministic() {
        let spec = DiffusionSpec { tau: vec![0.3], kappa: 0.5, noise_sd: 0.0 };
        let p = simulate_diffusion(&spec, 2, 50, 4).unwrap();
        assert_eq!(add_noise(&p, 0.0, 9).unwrap(), p);
        assert_eq!(add_noise(&p, 0.01, 9).unwrap(), add_noise(&p, 0.01, 9).unwrap());
        assert_eq!(simulate_diffusion(&spec, 2, 50, 4).unwrap(), p);
    }

    #[test]
    fn noise_variance_matches() {
        let spec = DiffusionSpec { tau: vec![0.1, 0.2], kappa: 0.5, noise_sd: 0.0 };
        let p = simulate_diffusion(&spec, 20, 390, 2).unwrap();
        let y = add_noise(&p, 0.01, 3).unwrap();
        let d: Vec<f64> = y.logp.iter().zip(&p.logp).map(|(a, b)| a - b).collect();
        let var = d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64;
        assert!((var / 1e-4 - 1.0).abs() < 0.03, "{var}");
    }
}
