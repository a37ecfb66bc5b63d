//! Conditional variance and realized-measure mean recursions.
//!
//! Both equations share the same driver: day `t` uses the own lagged realized
//! measure `RM_{i,t-1}` and its network average `(W RM_{t-1})_i`. Day 0 of a
//! panel corresponds to the first observation and carries the initial values.

use super::panel::{LatentPanels, Panel, PanelSeries};
use super::params::{NheavyParams, Slopes};
use crate::error::{invalid, Error, Result};
use crate::network::NormalizedNetwork;

/// Realized measures together with their network averages, day by day.
#[derive(Debug, Clone)]
pub struct Regressors {
    pub rm: Panel,
    pub wrm: Panel,
}

impl Regressors {
    pub fn new(w: &NormalizedNetwork, rm: &Panel) -> Self {
        let mut wrm = Panel::zeros(rm.t_len(), rm.n());
        for t in 0..rm.t_len() {
            w.apply_into(rm.row(t), wrm.row_mut(t));
        }
        Self { rm: rm.clone(), wrm }
    }

    pub fn t_len(&self) -> usize {
        self.rm.t_len()
    }

    pub fn n(&self) -> usize {
        self.rm.n()
    }
}

/// `x_it = c_i + α RM_{i,t-1} + λ (W RM_{t-1})_i + β x_{i,t-1}` with
/// `x_{i0} = init_i`.
pub fn recursion(intercept: &[f64], slopes: Slopes, reg: &Regressors, init: &[f64]) -> Panel {
    let (t_len, n) = (reg.t_len(), reg.n());
    let mut x = Panel::zeros(t_len, n);
    if t_len == 0 {
        return x;
    }
    x.row_mut(0).copy_from_slice(init);
    for t in 1..t_len {
        let (rm, wrm) = (reg.rm.row(t - 1), reg.wrm.row(t - 1));
        for i in 0..n {
            let prev = x.get(t - 1, i);
            x.set(t, i, intercept[i] + slopes.alpha * rm[i] + slopes.lambda * wrm[i] + slopes.beta * prev);
        }
    }
    x
}

/// `T^{-1/2} Σ_{t=1}^{⌊√T⌋} x_it` for every asset.
pub fn head_sum_init(x: &Panel) -> Vec<f64> {
    let t_len = x.t_len();
    let head = (t_len as f64).sqrt().floor() as usize;
    let scale = (t_len as f64).sqrt();
    (0..x.n()).map(|i| (0..head).map(|t| x.get(t, i)).sum::<f64>() / scale).collect()
}

/// Initial values for [`filter`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterInit {
    pub h: Vec<f64>,
    pub mu: Vec<f64>,
}

impl FilterInit {
    /// The truncated-sum initialisation used by the quasi-likelihoods.
    pub fn head_sum(panel: &PanelSeries) -> Self {
        Self { h: head_sum_init(&panel.r2), mu: head_sum_init(&panel.rm) }
    }
}

/// Runs both recursions over the panel.
pub fn filter(
    params: &NheavyParams,
    w: &NormalizedNetwork,
    panel: &PanelSeries,
    init: &FilterInit,
) -> Result<LatentPanels> {
    let n = panel.n();
    if w.n() != n {
        return invalid(format!("network has {} nodes but panel has {n} assets", w.n()));
    }
    if init.h.len() != n || init.mu.len() != n {
        return invalid("initial values must have one entry per asset");
    }
    if let Some(v) = init.h.iter().chain(&init.mu).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return invalid(format!("initial values must be strictly positive, got {v}"));
    }
    if panel.rm.as_slice().iter().chain(panel.r2.as_slice()).any(|x| x.is_nan()) {
        return Err(Error::Data("panel contains NaN".into()));
    }
    let reg = Regressors::new(w, &panel.rm);
    let h = recursion(&vec![params.phi.omega; n], params.phi.slopes(), &reg, &init.h);
    let mu = recursion(&vec![params.phi_r.omega; n], params.phi_r.slopes(), &reg, &init.mu);
    Ok(LatentPanels { h, mu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EquationParams;
    use crate::network::{normalize, AdjacencyMatrix};

    fn panel(rows_r2: Vec<Vec<f64>>, rows_rm: Vec<Vec<f64>>) -> PanelSeries {
        PanelSeries::new(Panel::from_rows(rows_r2).unwrap(), Panel::from_rows(rows_rm).unwrap()).unwrap()
    }

    #[test]
    fn constant_recursion_when_dynamics_vanish() {
        let p = panel(vec![vec![1.0, 2.0]; 5], vec![vec![3.0, 0.5]; 5]);
        let w = normalize(&AdjacencyMatrix::complete(2));
        let params =
            NheavyParams::new(EquationParams::new(0.7, 0.0, 0.0, 0.0), EquationParams::new(0.2, 0.0, 0.0, 0.0));
        let init = FilterInit { h: vec![1.0, 1.0], mu: vec![1.0, 1.0] };
        let lat = filter(&params, &w, &p, &init).unwrap();
        for t in 1..5 {
            assert_eq!(lat.h.row(t), &[0.7, 0.7]);
            assert_eq!(lat.mu.row(t), &[0.2, 0.2]);
        }
    }

    #[test]
    fn no_network_term_is_univariate_heavy() {
        let rm = vec![vec![1.0, 4.0], vec![2.0, 1.0], vec![0.5, 3.0], vec![1.5, 2.0]];
        let p = panel(rm.clone(), rm.clone());
        let w = normalize(&AdjacencyMatrix::complete(2));
        let params =
            NheavyParams::new(EquationParams::new(0.1, 0.3, 0.0, 0.5), EquationParams::new(0.2, 0.2, 0.0, 0.6));
        let init = FilterInit { h: vec![1.0, 2.0], mu: vec![0.5, 0.7] };
        let lat = filter(&params, &w, &p, &init).unwrap();
        for i in 0..2 {
            let mut h = init.h[i];
            for t in 1..4 {
                h = 0.1 + 0.3 * rm[t - 1][i] + 0.5 * h;
                assert!((lat.h.get(t, i) - h).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn filter_errors() {
        let p = panel(vec![vec![1.0]; 3], vec![vec![1.0]; 3]);
        let w = normalize(&AdjacencyMatrix::empty(1));
        let params =
            NheavyParams::new(EquationParams::new(0.1, 0.1, 0.0, 0.5), EquationParams::new(0.1, 0.1, 0.0, 0.5));
        let bad = FilterInit { h: vec![0.0], mu: vec![1.0] };
        assert!(matches!(filter(&params, &w, &p, &bad), Err(Error::InvalidInput(_))));
        let mut nan = p.clone();
        nan.rm.set(1, 0, f64::NAN);
        let init = FilterInit { h: vec![1.0], mu: vec![1.0] };
        assert!(matches!(filter(&params, &w, &nan, &init), Err(Error::Data(_))));
    }

    #[test]
    fn head_sum_init_uses_floor_sqrt_head() {
        // T = 10: ⌊√10⌋ = 3 terms scaled by 1/√10.
        let x = Panel::from_rows((1..=10).map(|t| vec![t as f64]).collect()).unwrap();
        assert!((head_sum_init(&x)[0] - 6.0 / 10f64.sqrt()).abs() < 1e-15);
    }
}
