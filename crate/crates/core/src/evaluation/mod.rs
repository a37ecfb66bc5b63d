//! Forecast evaluation: the QLIKE loss, the network GARCH comparator,
//! rolling and fixed-window backtests, and the Monte Carlo RMSE harness.

mod backtest;
mod forecasting;
mod harness;
mod ngarch;

pub use backtest::{rolling_backtest, BacktestConfig, BacktestReport, ForecastModel, Protocol};
pub use forecasting::NheavyCoefficients;
pub use harness::{rmse, rmse_harness, write_rmse_csv, Dgp, ParameterSummary, Replication, RmseDesign, RmseTable};
pub use ngarch::{
    fit_ngarch_one_step, fit_ngarch_two_step, ngarch_filter, ngarch_forecast, simulate_ngarch, NgarchFit, NgarchParams,
};

/// Default floor applied to zero realized squared returns.
pub const DEFAULT_QLIKE_FLOOR: f64 = 1e-12;

/// `r²/σ² − log(r²/σ²) − 1`. Infinite when `r² = 0`.
pub fn qlike(r2_realized: f64, sigma2_pred: f64) -> f64 {
    let ratio = r2_realized / sigma2_pred;
    ratio - ratio.ln() - 1.0
}

/// [`qlike`] with `r²` raised to `floor` first; the flag reports whether the
/// floor was hit.
pub fn qlike_floored(r2_realized: f64, sigma2_pred: f64, floor: f64) -> (f64, bool) {
    if r2_realized < floor {
        (qlike(floor, sigma2_pred), true)
    } else {
        (qlike(r2_realized, sigma2_pred), false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_values() {
        assert_eq!(qlike(0.37, 0.37), 0.0);
        assert!((qlike(2.0, 1.0) - (1.0 - 2f64.ln())).abs() < 1e-15);
        assert_eq!(qlike(0.0, 1.0), f64::INFINITY);
        let (v, hit) = qlike_floored(0.0, 1.0, 1e-12);
        assert!(hit && v.is_finite() && v > 0.0);
        assert!(!qlike_floored(0.5, 1.0, 1e-12).1);
    }

    #[test]
    fn minimized_at_realized_value() {
        let r2 = 0.8;
        let at = qlike(r2, r2);
        for s in [0.1, 0.5, 0.79, 0.81, 1.0, 4.0] {
            assert!(qlike(r2, s) > at);
        }
    }
}
