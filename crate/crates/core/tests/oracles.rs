//! Model identities checked against independent computations.

use nalgebra::{DMatrix, DVector};
use nheavy::estimation::{fit_one_step, fit_two_step, qll_returns, FitConfig, InitRule};
use nheavy::evaluation::{ngarch_filter, ngarch_forecast, NheavyCoefficients};
use nheavy::model::{
    block_dynamics_with_intercepts, forecast, simulate_nheavy, targeting_intercepts, unconditional_mean,
    EquationParams, InnovationSpec, NheavyParams, Panel, Slopes,
};
use nheavy::network::{normalize, AdjacencyMatrix, NetworkKind};

fn theta() -> NheavyParams {
    NheavyParams::new(EquationParams::new(0.1, 0.3, 0.2, 0.4), EquationParams::new(0.1, 0.3, 0.2, 0.3))
}

fn ring(n: usize) -> AdjacencyMatrix {
    AdjacencyMatrix::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
}

#[test]
fn long_horizon_forecast_reaches_unconditional_level() {
    let w = normalize(&ring(6));
    let p = theta();
    let (h_bar, mu_bar) = unconditional_mean(&p, &w).unwrap();
    // Solve (I - B) x = w from an explicitly assembled B.
    let n = 6;
    let wd = w.to_dense();
    let id = DMatrix::<f64>::identity(n, n);
    let mut b = DMatrix::zeros(2 * n, 2 * n);
    b.view_mut((0, 0), (n, n)).copy_from(&(&id * p.phi.beta));
    b.view_mut((0, n), (n, n)).copy_from(&(&id * p.phi.alpha + &wd * p.phi.lambda));
    b.view_mut((n, n), (n, n)).copy_from(&(&id * (p.phi_r.alpha + p.phi_r.beta) + &wd * p.phi_r.lambda));
    let wv = DVector::from_iterator(2 * n, (0..2 * n).map(|k| if k < n { p.phi.omega } else { p.phi_r.omega }));
    let x = (DMatrix::identity(2 * n, 2 * n) - b).lu().solve(&wv).unwrap();
    for i in 0..n {
        approx::assert_relative_eq!(h_bar[i], x[i], max_relative = 1e-12);
        approx::assert_relative_eq!(mu_bar[i], x[n + i], max_relative = 1e-12);
    }
    let h0 = vec![5.0; n];
    let mu0 = vec![0.01; n];
    let mut prev_gap = f64::INFINITY;
    for s in [0, 5, 20, 80, 300] {
        let f = forecast(&p, &w, &h0, &mu0, s).unwrap();
        let gap = (0..n).map(|i| (f.h[i] - x[i]).abs().max((f.mu[i] - x[n + i]).abs())).fold(0.0, f64::max);
        assert!(gap <= prev_gap);
        prev_gap = gap;
    }
    assert!(prev_gap < 1e-10);
}

#[test]
fn targeted_intercepts_reproduce_the_moments() {
    let w = normalize(&NetworkKind::Sbm { k: 3 }.generate(12, 4).unwrap());
    let mu: Vec<f64> = (0..12).map(|i| 0.5 + 0.1 * i as f64).collect();
    let mu_r: Vec<f64> = (0..12).map(|i| 0.4 + 0.05 * i as f64).collect();
    let (phi, phi_r) = (Slopes::new(0.2, 0.1, 0.5), Slopes::new(0.3, 0.2, 0.4));
    let c = targeting_intercepts(phi, phi_r, &w, &mu, &mu_r).unwrap();
    let dy = block_dynamics_with_intercepts(phi, phi_r, &c.r, &c.rm, &w);
    let x = (DMatrix::identity(24, 24) - &dy.b_mat).lu().solve(&dy.w_vec).unwrap();
    for i in 0..12 {
        approx::assert_relative_eq!(x[i], mu[i], max_relative = 1e-12);
        approx::assert_relative_eq!(x[12 + i], mu_r[i], max_relative = 1e-12);
    }
}

#[test]
fn conventional_forecasts_match_iterated_expectations() {
    let w = normalize(&ring(4));
    let p = theta();
    let coef = NheavyCoefficients::from_params(&p, 4);
    let rm = [0.3, 1.2, 0.7, 2.0];
    let h = [0.9, 1.1, 0.6, 1.4];
    let mu = [0.5, 0.8, 0.9, 1.5];
    let fc = coef.forecasts(&w, &rm, &h, &mu, 6).unwrap();
    // Day T+1 uses the observed RM_T; later days replace RM by its
    // conditional mean μ.
    let step = |rm: &[f64], h: &[f64], mu: &[f64]| {
        let wrm = w.apply(rm);
        let nh: Vec<f64> = (0..4).map(|i| 0.1 + 0.3 * rm[i] + 0.2 * wrm[i] + 0.4 * h[i]).collect();
        let nm: Vec<f64> = (0..4).map(|i| 0.1 + 0.3 * rm[i] + 0.2 * wrm[i] + 0.3 * mu[i]).collect();
        (nh, nm)
    };
    let (mut hh, mut mm) = step(&rm, &h, &mu);
    for f in &fc {
        for i in 0..4 {
            approx::assert_relative_eq!(f.h[i], hh[i], max_relative = 1e-12);
            approx::assert_relative_eq!(f.mu[i], mm[i], max_relative = 1e-12);
        }
        let next = step(&mm.clone(), &hh, &mm);
        hh = next.0;
        mm = next.1;
    }
}

#[test]
fn ngarch_without_neighbours_is_garch_one_one() {
    // One asset: the network term vanishes and the filter is GARCH(1,1).
    let w = normalize(&AdjacencyMatrix::empty(1));
    let r2: Vec<f64> = (0..40).map(|t| 0.2 + ((t * 7) % 11) as f64 / 10.0).collect();
    let panel = Panel::from_vec(40, 1, r2.clone()).unwrap();
    let (omega, alpha, beta) = (0.05, 0.1, 0.85);
    let h = ngarch_filter(&[omega], Slopes::new(alpha, 0.3, beta), &w, &panel, &[1.0]).unwrap();
    let mut g = 1.0;
    for t in 0..40 {
        if t > 0 {
            g = omega + alpha * r2[t - 1] + beta * g;
        }
        approx::assert_relative_eq!(h.get(t, 0), g, max_relative = 1e-14);
    }
    let fc = ngarch_forecast(&[omega], Slopes::new(alpha, 0.3, beta), &w, &[r2[39]], &[g], 5).unwrap();
    let mut e = omega + alpha * r2[39] + beta * g;
    for f in fc {
        approx::assert_relative_eq!(f[0], e, max_relative = 1e-14);
        e = omega + (alpha + beta) * e;
    }
}

#[test]
fn simulate_then_fit_recovers_parameters() {
    let w = normalize(&NetworkKind::Dyad.generate(25, 11).unwrap());
    let p = theta();
    let sim = simulate_nheavy(&p, &w, 1500, &InnovationSpec::default(), 500, 12).unwrap();
    let fit = fit_one_step(&sim.panel, &w, None, &FitConfig::default()).unwrap();
    assert!(fit.converged);
    for ((est, truth), se) in fit.estimates().iter().zip(p.to_vec()).zip(&fit.std_errors) {
        assert!((est - truth).abs() < 4.0 * se, "estimate {est} vs {truth} (se {se})");
    }
    let two = fit_two_step(&sim.panel, &w, None, &FitConfig::default()).unwrap();
    assert!(two.converged);
    let slopes = [p.phi.alpha, p.phi.lambda, p.phi.beta, p.phi_r.alpha, p.phi_r.lambda, p.phi_r.beta];
    for (est, truth) in two.estimates().iter().zip(slopes) {
        assert!((est - truth).abs() < 0.15, "two-step estimate {est} vs {truth}");
    }
}

#[test]
fn sample_mean_initialisation_is_honoured() {
    let w = normalize(&ring(5));
    let sim = simulate_nheavy(&theta(), &w, 300, &InnovationSpec::default(), 100, 2).unwrap();
    let cfg = FitConfig { init_rule: InitRule::SampleMean, ..FitConfig::default() };
    let fit = fit_one_step(&sim.panel, &w, None, &cfg).unwrap();
    assert_eq!(fit.init_rule, InitRule::SampleMean);
    let head_sum = fit_one_step(&sim.panel, &w, None, &FitConfig::default()).unwrap();
    assert_ne!(fit.qll.returns.value, head_sum.qll.returns.value);
}

#[test]
fn fits_do_not_stall_at_unit_persistence() {
    // From the default start with sample-mean initial values the return
    // equation used to drift to beta near one and stop on a flat transform.
    let theta = theta();
    let w = normalize(&NetworkKind::Dyad.generate(25, 0).unwrap());
    let sim = simulate_nheavy(&theta, &w, 500, &InnovationSpec::default(), 500, 0).unwrap();
    let cfg = FitConfig { init_rule: InitRule::SampleMean, ..FitConfig::default() };
    let fit = fit_one_step(&sim.panel, &w, None, &cfg).unwrap();
    let at_truth = qll_returns(&theta.phi, &w, &sim.panel, InitRule::SampleMean).unwrap();
    assert!(fit.qll.returns.value <= at_truth.value, "{} > {}", fit.qll.returns.value, at_truth.value);
    assert!(fit.theta_hat.phi.beta < 0.9, "{:?}", fit.theta_hat.phi);
}
