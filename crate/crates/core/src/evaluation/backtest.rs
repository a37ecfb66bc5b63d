//! Rolling-window and fixed-window out-of-sample backtests scored by QLIKE.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forecasting::NheavyCoefficients;
use super::ngarch::{fit_ngarch_one_step, fit_ngarch_two_step, ngarch_filter, ngarch_forecast, NgarchParams};
use super::{qlike_floored, DEFAULT_QLIKE_FLOOR};
use crate::error::{invalid, Result};
use crate::estimation::{fit_one_step, fit_two_step, FitConfig, TwoStepInit};
use crate::model::{PanelSeries, Slopes};
use crate::network::NormalizedNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastModel {
    NheavyOneStep,
    NheavyTwoStep,
    NgarchOneStep,
    NgarchTwoStep,
    /// Predicts the realized value itself; a zero-loss reference.
    PerfectForesight,
}

impl ForecastModel {
    pub fn name(self) -> &'static str {
        match self {
            ForecastModel::NheavyOneStep => "nheavy_one_step",
            ForecastModel::NheavyTwoStep => "nheavy_two_step",
            ForecastModel::NgarchOneStep => "ngarch_one_step",
            ForecastModel::NgarchTwoStep => "ngarch_two_step",
            ForecastModel::PerfectForesight => "perfect_foresight",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Refit on the `window_len` days ending at each origin.
    Rolling,
    /// Fit once on the first `window_len` days, then filter forward.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub fit: FitConfig,
    /// `r²` values below this are raised to it before scoring.
    pub qlike_floor: f64,
    /// Start each rolling refit from the previous origin's estimate. Origins
    /// are then processed in order; otherwise they run in parallel from the
    /// default start.
    pub warm_start: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self { fit: FitConfig::default(), qlike_floor: DEFAULT_QLIKE_FLOOR, warm_start: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub model: ForecastModel,
    pub protocol: Protocol,
    pub horizon: usize,
    pub window_len: usize,
    pub origins: usize,
    /// Average QLIKE of each asset over the origins.
    pub per_asset: Vec<f64>,
    /// Cross-sectional average QLIKE of each origin.
    pub per_origin: Vec<f64>,
    pub mean: f64,
    pub floor_hits: usize,
    /// Refits that failed; the previous estimate was reused.
    pub fit_failures: usize,
    pub nonconverged: usize,
}

/// Fitted coefficients of either model family with per-asset intercepts.
#[derive(Debug, Clone)]
enum Fitted {
    Nheavy(NheavyCoefficients),
    Ngarch { c: Vec<f64>, s: Slopes },
}

/// Warm-start information carried between rolling refits.
#[derive(Debug, Clone, Copy)]
enum Start {
    Default,
    NheavyOne(crate::model::NheavyParams),
    NheavyTwo(TwoStepInit),
    NgarchOne(NgarchParams),
    NgarchTwo(Slopes),
}

struct FitOutcome {
    fitted: Fitted,
    next: Start,
    converged: bool,
}

fn fit_model(
    model: ForecastModel,
    panel: &PanelSeries,
    w: &NormalizedNetwork,
    start: Start,
    cfg: &FitConfig,
) -> Result<FitOutcome> {
    let n = panel.n();
    match model {
        ForecastModel::NheavyOneStep => {
            let init = if let Start::NheavyOne(p) = start { Some(p) } else { None };
            let f = fit_one_step(panel, w, init.as_ref(), cfg)?;
            Ok(FitOutcome {
                fitted: Fitted::Nheavy(NheavyCoefficients::from_fit(&f, n)),
                next: Start::NheavyOne(f.theta_hat),
                converged: f.converged,
            })
        }
        ForecastModel::NheavyTwoStep => {
            let init = if let Start::NheavyTwo(p) = start { Some(p) } else { None };
            let f = fit_two_step(panel, w, init.as_ref(), cfg)?;
            let next = TwoStepInit { phi: f.theta_hat.phi.slopes(), phi_r: f.theta_hat.phi_r.slopes() };
            Ok(FitOutcome {
                fitted: Fitted::Nheavy(NheavyCoefficients::from_fit(&f, n)),
                next: Start::NheavyTwo(next),
                converged: f.converged,
            })
        }
        ForecastModel::NgarchOneStep => {
            let init = if let Start::NgarchOne(p) = start { Some(p) } else { None };
            let f = fit_ngarch_one_step(panel, w, init.as_ref(), cfg)?;
            Ok(FitOutcome {
                fitted: Fitted::Ngarch { c: f.intercepts.clone(), s: f.params.slopes() },
                next: Start::NgarchOne(f.params),
                converged: f.converged,
            })
        }
        ForecastModel::NgarchTwoStep => {
            let init = if let Start::NgarchTwo(p) = start { Some(p) } else { None };
            let f = fit_ngarch_two_step(panel, w, init.as_ref(), cfg)?;
            Ok(FitOutcome {
                fitted: Fitted::Ngarch { c: f.intercepts.clone(), s: f.params.slopes() },
                next: Start::NgarchTwo(f.params.slopes()),
                converged: f.converged,
            })
        }
        ForecastModel::PerfectForesight => unreachable!("no fit needed"),
    }
}

/// Variance forecast `s` days past the last day of `span`. The filter starts
/// from initial values computed on `init_from`.
fn predict(
    fitted: &Fitted,
    w: &NormalizedNetwork,
    span: &PanelSeries,
    init_from: &PanelSeries,
    s: usize,
    cfg: &FitConfig,
) -> Result<Vec<f64>> {
    let last = span.t_len() - 1;
    let rule = cfg.init_rule;
    match fitted {
        Fitted::Nheavy(coef) => {
            let lat =
                coef.filter_from(w, span, &rule.initial_values(&init_from.r2), &rule.initial_values(&init_from.rm))?;
            let f = coef.forecasts(w, span.rm.row(last), lat.h.row(last), lat.mu.row(last), s)?;
            Ok(f[s - 1].h.clone())
        }
        Fitted::Ngarch { c, s: slopes } => {
            let init = rule.initial_values(&init_from.r2);
            let h = ngarch_filter(c, *slopes, w, &span.r2, &init)?;
            let f = ngarch_forecast(c, *slopes, w, span.r2.row(last), h.row(last), s)?;
            Ok(f[s - 1].clone())
        }
    }
}

/// Out-of-sample QLIKE of `model` at horizon `s`.
///
/// Origin `o` uses days `o .. o + window_len` (rolling) and scores the
/// forecast of day `o + window_len − 1 + s`; there are
/// `T − window_len − s + 1` origins. Under the fixed protocol the model is
/// fitted once on the first window and the filter runs forward from the start
/// of the sample, so every forecast uses data up to its origin only.
pub fn rolling_backtest(
    panel: &PanelSeries,
    w: &NormalizedNetwork,
    model: ForecastModel,
    window_len: usize,
    s: usize,
    protocol: Protocol,
    cfg: &BacktestConfig,
) -> Result<BacktestReport> {
    let t_len = panel.t_len();
    if w.n() != panel.n() {
        return invalid(format!("network has {} nodes but panel has {} assets", w.n(), panel.n()));
    }
    if s == 0 {
        return invalid("forecast horizon must be at least 1");
    }
    if window_len < 2 || window_len + s > t_len {
        return invalid(format!(
            "need 2 <= window_len and window_len + s <= T, got window {window_len}, s {s}, T {t_len}"
        ));
    }
    let origins = t_len - window_len - s + 1;
    let n = panel.n();
    let mut fit_failures = 0;
    let mut nonconverged = 0;
    let preds: Vec<Vec<f64>> = match (model, protocol) {
        (ForecastModel::PerfectForesight, _) => {
            (0..origins).map(|o| panel.r2.row(o + window_len - 1 + s).to_vec()).collect()
        }
        (_, Protocol::Fixed) => {
            let in_sample = panel.days(0..window_len);
            let fit = fit_model(model, &in_sample, w, Start::Default, &cfg.fit)?;
            nonconverged += usize::from(!fit.converged);
            (0..origins)
                .map(|o| predict(&fit.fitted, w, &panel.days(0..o + window_len), &in_sample, s, &cfg.fit))
                .collect::<Result<_>>()?
        }
        (_, Protocol::Rolling) if cfg.warm_start => {
            let mut start = Start::Default;
            let mut prev: Option<Fitted> = None;
            let mut out = Vec::with_capacity(origins);
            for o in 0..origins {
                let span = panel.days(o..o + window_len);
                let fitted = match fit_model(model, &span, w, start, &cfg.fit) {
                    Ok(f) => {
                        nonconverged += usize::from(!f.converged);
                        start = f.next;
                        f.fitted
                    }
                    Err(e) => {
                        fit_failures += 1;
                        prev.clone().ok_or(e)?
                    }
                };
                out.push(predict(&fitted, w, &span, &span, s, &cfg.fit)?);
                prev = Some(fitted);
            }
            out
        }
        (_, Protocol::Rolling) => {
            let results: Vec<Result<(Vec<f64>, bool)>> = (0..origins)
                .into_par_iter()
                .map(|o| {
                    let span = panel.days(o..o + window_len);
                    let f = fit_model(model, &span, w, Start::Default, &cfg.fit)?;
                    Ok((predict(&f.fitted, w, &span, &span, s, &cfg.fit)?, f.converged))
                })
                .collect();
            let mut out = Vec::with_capacity(origins);
            for r in results {
                let (p, conv) = r?;
                nonconverged += usize::from(!conv);
                out.push(p);
            }
            out
        }
    };
    let mut per_asset = vec![0.0; n];
    let mut per_origin = vec![0.0; origins];
    let mut floor_hits = 0;
    for (o, pred) in preds.iter().enumerate() {
        let target = panel.r2.row(o + window_len - 1 + s);
        for i in 0..n {
            let (loss, hit) = if model == ForecastModel::PerfectForesight {
                let x = target[i].max(cfg.qlike_floor);
                (qlike_floored(x, x, cfg.qlike_floor).0, target[i] < cfg.qlike_floor)
            } else {
                qlike_floored(target[i], pred[i], cfg.qlike_floor)
            };
            floor_hits += usize::from(hit);
            per_asset[i] += loss;
            per_origin[o] += loss / n as f64;
        }
    }
    per_asset.iter_mut().for_each(|v| *v /= origins as f64);
    let mean = per_asset.iter().sum::<f64>() / n as f64;
    Ok(BacktestReport {
        model,
        protocol,
        horizon: s,
        window_len,
        origins,
        per_asset,
        per_origin,
        mean,
        floor_hits,
        fit_failures,
        nonconverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_nheavy, EquationParams, InnovationSpec, NheavyParams};
    use crate::network::{normalize, AdjacencyMatrix};

    fn data() -> (PanelSeries, NormalizedNetwork) {
        let p = NheavyParams::new(EquationParams::new(0.1, 0.3, 0.2, 0.4), EquationParams::new(0.1, 0.3, 0.2, 0.3));
        let w = normalize(&AdjacencyMatrix::sectors(&[2, 2]));
        (simulate_nheavy(&p, &w, 80, &InnovationSpec::default(), 100, 1).unwrap().panel, w)
    }

    #[test]
    fn perfect_foresight_and_origin_count() {
        let (panel, w) = data();
        let r = rolling_backtest(
            &panel,
            &w,
            ForecastModel::PerfectForesight,
            50,
            3,
            Protocol::Rolling,
            &BacktestConfig::default(),
        )
        .unwrap();
        assert_eq!(r.origins, 80 - 50 - 3 + 1);
        assert!(r.per_asset.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fixed_and_rolling_run_and_are_deterministic() {
        let (panel, w) = data();
        let cfg = BacktestConfig::default();
        for model in [ForecastModel::NheavyOneStep, ForecastModel::NgarchTwoStep] {
            for protocol in [Protocol::Fixed, Protocol::Rolling] {
                let a = rolling_backtest(&panel, &w, model, 60, 2, protocol, &cfg).unwrap();
                let b = rolling_backtest(&panel, &w, model, 60, 2, protocol, &cfg).unwrap();
                assert_eq!(a, b);
                assert_eq!(a.origins, 19);
                assert!(a.per_asset.iter().all(|v| *v >= 0.0 && v.is_finite()));
            }
        }
    }

    #[test]
    fn rejects_short_samples() {
        let (panel, w) = data();
        let cfg = BacktestConfig::default();
        assert!(rolling_backtest(&panel, &w, ForecastModel::NheavyOneStep, 79, 2, Protocol::Rolling, &cfg).is_err());
        assert!(rolling_backtest(&panel, &w, ForecastModel::NheavyOneStep, 50, 0, Protocol::Rolling, &cfg).is_err());
    }
}
