//! Daily realized variance estimators and the daily panel builder.

use serde::{Deserialize, Serialize};

use super::IntradayPanel;
use crate::error::{invalid, Error, Result};
use crate::model::{Panel, PanelSeries};

/// Estimator used for the daily realized measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RmEstimator {
    /// Sum of squared tick returns.
    Naive,
    /// Multi-scale realized variance; `scales` defaults to [`default_scales`].
    Msrv {
        #[serde(default)]
        scales: Option<usize>,
    },
}

impl Default for RmEstimator {
    fn default() -> Self {
        RmEstimator::Msrv { scales: None }
    }
}

impl RmEstimator {
    pub fn estimate(&self, ticks: &[f64]) -> Result<f64> {
        match *self {
            RmEstimator::Naive => naive(ticks),
            RmEstimator::Msrv { scales } => msrv(ticks, scales.unwrap_or_else(|| default_scales(ticks.len()))),
        }
    }
}

/// `⌊√(M − 1)⌉`, at least 2 and below `M`.
pub fn default_scales(m_ticks: usize) -> usize {
    let k = ((m_ticks.saturating_sub(1)) as f64).sqrt().round() as usize;
    k.max(2).min(m_ticks.saturating_sub(1).max(2))
}

fn naive(ticks: &[f64]) -> Result<f64> {
    if ticks.len() < 2 {
        return invalid(format!("realized variance needs at least 2 ticks, got {}", ticks.len()));
    }
    Ok(ticks.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum())
}

/// Weights of the multi-scale estimator of Zhang (2006), "Efficient
/// estimation of stochastic volatility using noisy observations: a
/// multi-scale approach", Bernoulli 12(6):
///
/// ```text
/// a_i = 12 (i/K²) (i/K − 1/2 − 1/(2K)) / (1 − 1/K²),   i = 1..K
/// ```
///
/// They satisfy `Σ a_i = 1` and `Σ a_i / i = 0`.
pub fn msrv_weights(k: usize) -> Vec<f64> {
    let kf = k as f64;
    (1..=k)
        .map(|i| {
            let x = i as f64;
            12.0 * (x / (kf * kf)) * (x / kf - 0.5 - 0.5 / kf) / (1.0 - 1.0 / (kf * kf))
        })
        .collect()
}

/// `Σ_k a_k RV^{(k)}` with the edge-corrected subsampled averages
/// `RV^{(k)} = n / (k (n − k + 1)) Σ_{j=k}^{n} (Y_j − Y_{j−k})²`
/// over `n = M − 1` increments. Under i.i.d. noise and constant volatility
/// the noise and signal terms are both exactly unbiased.
fn msrv(ticks: &[f64], k: usize) -> Result<f64> {
    let m = ticks.len();
    if k < 2 {
        return invalid(format!("multi-scale estimator needs K >= 2, got {k}"));
    }
    if k >= m {
        return invalid(format!("multi-scale estimator needs K < M, got K={k}, M={m}"));
    }
    let n = (m - 1) as f64;
    let weights = msrv_weights(k);
    let mut total = 0.0;
    for (idx, a) in weights.iter().enumerate() {
        let s = idx + 1;
        let sum: f64 = (s..m).map(|j| (ticks[j] - ticks[j - s]).powi(2)).sum();
        total += a * sum * n / (s as f64 * (n - s as f64 + 1.0));
    }
    Ok(total)
}

pub fn rv_naive(panel: &IntradayPanel, day: usize, asset: usize) -> Result<f64> {
    panel.check_index(day, asset)?;
    naive(&panel.day_series(day, asset))
}

pub fn multiscale_rv(panel: &IntradayPanel, day: usize, asset: usize, scales: usize) -> Result<f64> {
    panel.check_index(day, asset)?;
    msrv(&panel.day_series(day, asset), scales)
}

/// Daily panel from one intraday panel: close-to-close squared returns and
/// the chosen realized measure. The multi-scale estimator can be negative on
/// short or very noisy days; such values are floored at zero.
pub fn build_panel(intraday: &IntradayPanel, estimator: RmEstimator) -> Result<PanelSeries> {
    build_panel_with_returns(intraday, intraday, estimator)
}

/// As [`build_panel`], with returns taken from `returns_from` (for example the
/// noiseless prices of a simulation).
pub fn build_panel_with_returns(
    rm_from: &IntradayPanel,
    returns_from: &IntradayPanel,
    estimator: RmEstimator,
) -> Result<PanelSeries> {
    let (l, n) = (rm_from.l_days(), rm_from.n());
    if returns_from.l_days() != l || returns_from.n() != n {
        return invalid("return and realized-measure panels differ in shape");
    }
    if l < 2 {
        return invalid(format!("daily panel needs at least 2 days, got {l}"));
    }
    let mut r2 = Panel::zeros(l, n);
    let mut rm = Panel::zeros(l, n);
    for day in 0..l {
        for i in 0..n {
            let prev = if day == 0 { returns_from.start()[i] } else { returns_from.close(day - 1, i) };
            r2.set(day, i, (returns_from.close(day, i) - prev).powi(2));
            let v = estimator
                .estimate(&rm_from.day_series(day, i))
                .map_err(|e| Error::Data(format!("day {day}, asset {i}: {e}")))?;
            rm.set(day, i, v.max(0.0));
        }
    }
    PanelSeries::new(r2, rm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realized::{simulate_diffusion, DiffusionSpec};

    #[test]
    fn weights_satisfy_constraints() {
        for k in [2, 3, 5, 10, 20, 57] {
            let a = msrv_weights(k);
            let s: f64 = a.iter().sum();
            let s_inv: f64 = a.iter().enumerate().map(|(i, w)| w / (i + 1) as f64).sum();
            assert!((s - 1.0).abs() < 1e-12, "k={k}: {s}");
            assert!(s_inv.abs() < 1e-12, "k={k}: {s_inv}");
        }
    }

    #[test]
    fn hand_values() {
        assert_eq!(naive(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((naive(&[0.0, 0.1]).unwrap() - 0.01).abs() < 1e-15);
        assert!(naive(&[0.0]).is_err());
        assert!(msrv(&[0.0; 5], 5).is_err());
        assert!(msrv(&[0.0; 5], 1).is_err());
        assert_eq!(msrv(&[2.0; 50], 5).unwrap(), 0.0);
    }

    #[test]
    fn constant_prices_give_zero_panel_and_days_are_conserved() {
        let spec = DiffusionSpec { tau: vec![0.0; 3], kappa: 0.5, noise_sd: 0.0 };
        let p = simulate_diffusion(&spec, 7, 30, 1).unwrap();
        let panel = build_panel(&p, RmEstimator::default()).unwrap();
        assert_eq!(panel.t_len(), 7);
        assert!(panel.r2.as_slice().iter().chain(panel.rm.as_slice()).all(|v| *v == 0.0));
    }

    #[test]
    fn estimator_errors_carry_context() {
        let spec = DiffusionSpec { tau: vec![0.1], kappa: 0.5, noise_sd: 0.0 };
        let p = simulate_diffusion(&spec, 3, 4, 1).unwrap();
        let err = build_panel(&p, RmEstimator::Msrv { scales: Some(10) }).unwrap_err();
        assert!(err.to_string().contains("day 0, asset 0"), "{err}");
    }

    #[test]
    fn default_scales_are_valid() {
        assert_eq!(default_scales(390), 20);
        assert_eq!(default_scales(3), 2);
        let j = serde_json::to_string(&RmEstimator::default()).unwrap();
        assert_eq!(j, r#"{"kind":"msrv","scales":null}"#);
        let e: RmEstimator = serde_json::from_str(r#"{"kind":"naive"}"#).unwrap();
        assert_eq!(e, RmEstimator::Naive);
    }
}
