//! Unit-mean multiplicative innovations `(ε_it, ϵ_it)`.
//!
//! Each component has its own law; dependence between the return and the
//! realized-measure innovation of the same asset and day comes from a
//! Gaussian copula. Two standard normal scores with correlation `rho` are
//! pushed through `Φ` and then through each law's quantile function. With
//! `rho = 0` the laws are sampled directly.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist, Normal};

use crate::error::{invalid, Result};

/// Unit-mean positive law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum UnitMeanLaw {
    /// Always one.
    Degenerate,
    /// Chi-square with one degree of freedom (squared standard normal).
    ChiSquare1,
    /// Gamma with shape `a` and scale `1/a`.
    Gamma { shape: f64 },
}

impl UnitMeanLaw {
    /// `E x²`.
    pub fn second_moment(&self) -> f64 {
        match *self {
            UnitMeanLaw::Degenerate => 1.0,
            UnitMeanLaw::ChiSquare1 => 3.0,
            UnitMeanLaw::Gamma { shape } => 1.0 + 1.0 / shape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let UnitMeanLaw::Gamma { shape } = *self {
            if !(shape > 0.0) || !shape.is_finite() {
                return invalid(format!("gamma shape must be positive, got {shape}"));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            UnitMeanLaw::Degenerate => 1.0,
            UnitMeanLaw::ChiSquare1 => ChiSquared::new(1.0).expect("dof 1").sample(rng),
            UnitMeanLaw::Gamma { shape } => Gamma::new(shape, 1.0 / shape).expect("validated").sample(rng),
        }
    }

    /// Quantile of the law at the probability `Φ(z)`.
    ///
    /// Working from the normal score keeps the upper tail accurate where
    /// `Φ(z)` rounds to one.
    fn quantile_at_score(&self, z: f64) -> f64 {
        let norm = Normal::standard();
        match *self {
            UnitMeanLaw::Degenerate => 1.0,
            UnitMeanLaw::ChiSquare1 => {
                // F^{-1}(u) = Φ^{-1}(1 - (1-u)/2)² with 1-u = Φ(-z).
                let x = norm.inverse_cdf(0.5 * norm.cdf(-z));
                x * x
            }
            UnitMeanLaw::Gamma { shape } => {
                let u = norm.cdf(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                GammaDist::new(shape, shape).expect("validated").inverse_cdf(u)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnovationSpec {
    pub returns: UnitMeanLaw,
    pub measure: UnitMeanLaw,
    /// Correlation of the Gaussian scores behind `(ε_it, ϵ_it)`.
    #[serde(default)]
    pub rho: f64,
}

impl Default for InnovationSpec {
    fn default() -> Self {
        Self { returns: UnitMeanLaw::ChiSquare1, measure: UnitMeanLaw::Gamma { shape: 4.0 }, rho: 0.0 }
    }
}

impl InnovationSpec {
    pub const fn degenerate() -> Self {
        Self { returns: UnitMeanLaw::Degenerate, measure: UnitMeanLaw::Degenerate, rho: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.returns.validate()?;
        self.measure.validate()?;
        if !(-1.0..1.0).contains(&self.rho) || !self.rho.is_finite() {
            return invalid(format!("copula correlation must lie in (-1, 1), got {}", self.rho));
        }
        Ok(())
    }

    /// `κ₂^r = E ε²`.
    pub fn kappa2_r(&self) -> f64 {
        self.returns.second_moment()
    }

    /// `κ₂^R = E ϵ²`.
    pub fn kappa2_rm(&self) -> f64 {
        self.measure.second_moment()
    }

    /// `κ₂^{r,R} = E ε ϵ`, by Gauss-Hermite quadrature over the copula when
    /// the components are dependent.
    pub fn kappa2_cross(&self) -> f64 {
        if self.rho == 0.0
            || matches!(self.returns, UnitMeanLaw::Degenerate)
            || matches!(self.measure, UnitMeanLaw::Degenerate)
        {
            return 1.0;
        }
        let (nodes, weights) = gauss_hermite(48);
        let c = (1.0 - self.rho * self.rho).sqrt();
        let mut acc = 0.0;
        for (&x1, &w1) in nodes.iter().zip(&weights) {
            let z1 = std::f64::consts::SQRT_2 * x1;
            let e1 = self.returns.quantile_at_score(z1);
            for (&x2, &w2) in nodes.iter().zip(&weights) {
                let z2 = self.rho * z1 + c * std::f64::consts::SQRT_2 * x2;
                let e2 = self.measure.quantile_at_score(z2);
                acc += w1 * w2 * e1 * e2;
            }
        }
        acc / std::f64::consts::PI
    }

    /// One `(ε, ϵ)` draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        if self.rho == 0.0 {
            return (self.returns.sample(rng), self.measure.sample(rng));
        }
        let z1: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        let z2 = self.rho * z1 + (1.0 - self.rho * self.rho).sqrt() * e;
        (self.returns.quantile_at_score(z1), self.measure.quantile_at_score(z2))
    }
}

/// Physicists' Gauss-Hermite rule (weight `e^{-x²}`) by Golub-Welsch.
fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = nalgebra::DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let off = (k as f64 / 2.0).sqrt();
        jac[(k, k - 1)] = off;
        jac[(k - 1, k)] = off;
    }
    let eig = jac.symmetric_eigen();
    let mu0 = std::f64::consts::PI.sqrt();
    let mut pairs: Vec<(f64, f64)> =
        (0..m).map(|k| (eig.eigenvalues[k], mu0 * eig.eigenvectors[(0, k)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn moments_match_laws() {
        let spec =
            InnovationSpec { returns: UnitMeanLaw::ChiSquare1, measure: UnitMeanLaw::Gamma { shape: 2.0 }, rho: 0.6 };
        let mut rng = stream_rng(1, 0);
        let n = 200_000;
        let (mut m1, mut m2, mut s1, mut s2, mut c) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let (a, b) = spec.sample(&mut rng);
            m1 += a;
            m2 += b;
            s1 += a * a;
            s2 += b * b;
            c += a * b;
        }
        let nf = n as f64;
        assert!((m1 / nf - 1.0).abs() < 0.02);
        assert!((m2 / nf - 1.0).abs() < 0.01);
        assert!((s1 / nf - 3.0).abs() < 0.15);
        assert!((s2 / nf - 1.5).abs() < 0.03);
        let cross = spec.kappa2_cross();
        assert!(cross > 1.0);
        assert!((c / nf - cross).abs() < 0.03, "{} vs {cross}", c / nf);
    }

    #[test]
    fn hermite_rule_integrates_polynomials() {
        let (x, w) = gauss_hermite(20);
        let pi_sqrt = std::f64::consts::PI.sqrt();
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((m0 - pi_sqrt).abs() < 1e-12);
        assert!((m2 - pi_sqrt / 2.0).abs() < 1e-12);
    }

    #[test]
    fn independent_cross_moment_is_one() {
        assert_eq!(InnovationSpec::default().kappa2_cross(), 1.0);
        assert!(InnovationSpec { rho: 1.0, ..Default::default() }.validate().is_err());
    }
}
