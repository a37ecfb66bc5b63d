use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Coefficients of one equation: intercept, own lag, network lag, persistence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationParams {
    pub omega: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub beta: f64,
}

impl EquationParams {
    pub const fn new(omega: f64, alpha: f64, lambda: f64, beta: f64) -> Self {
        Self { omega, alpha, lambda, beta }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.omega, self.alpha, self.lambda, self.beta]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self::new(x[0], x[1], x[2], x[3])
    }

    pub fn slopes(self) -> Slopes {
        Slopes { alpha: self.alpha, lambda: self.lambda, beta: self.beta }
    }

    fn check_nonnegative(&self, name: &str) -> Result<()> {
        for (label, v) in [("omega", self.omega), ("alpha", self.alpha), ("lambda", self.lambda), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return invalid(format!("{name}.{label} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// Dynamic coefficients without the intercept, as used under targeting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Slopes {
    pub alpha: f64,
    pub lambda: f64,
    pub beta: f64,
}

impl Slopes {
    pub const fn new(alpha: f64, lambda: f64, beta: f64) -> Self {
        Self { alpha, lambda, beta }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.alpha, self.lambda, self.beta]
    }

    pub fn with_omega(self, omega: f64) -> EquationParams {
        EquationParams::new(omega, self.alpha, self.lambda, self.beta)
    }
}

/// Full parameter vector: return-variance equation `phi` and realized-measure
/// equation `phi_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NheavyParams {
    pub phi: EquationParams,
    pub phi_r: EquationParams,
}

impl NheavyParams {
    pub const fn new(phi: EquationParams, phi_r: EquationParams) -> Self {
        Self { phi, phi_r }
    }

    /// `(ω, α, λ, β, ω_R, α_R, λ_R, β_R)`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.phi.to_array().into_iter().chain(self.phi_r.to_array()).collect()
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self::new(EquationParams::from_slice(&x[..4]), EquationParams::from_slice(&x[4..8]))
    }

    /// Nonnegativity, `β < 1` and `α_R + λ_R + β_R < 1`.
    pub fn validate(&self) -> Result<()> {
        self.phi.check_nonnegative("phi")?;
        self.phi_r.check_nonnegative("phi_r")?;
        if self.phi.beta >= 1.0 {
            return invalid(format!("phi.beta must be < 1, got {}", self.phi.beta));
        }
        let s = self.phi_r.alpha + self.phi_r.lambda + self.phi_r.beta;
        if s >= 1.0 {
            return invalid(format!("alpha_r + lambda_r + beta_r must be < 1, got {s}"));
        }
        Ok(())
    }

    /// Sufficient condition for the targeted return equation:
    /// `α + λ κ_max + β < 1`.
    pub fn in_targeting_region(&self, kappa_max: f64) -> bool {
        self.phi.alpha + self.phi.lambda * kappa_max + self.phi.beta < 1.0
    }

    pub const NAMES: [&'static str; 8] =
        ["omega", "alpha", "lambda", "beta", "omega_r", "alpha_r", "lambda_r", "beta_r"];
}
