use super::dynamics::{check_stationarity, unconditional_mean};
use super::innovations::InnovationSpec;
use super::panel::{LatentPanels, Panel, PanelSeries};
use super::params::NheavyParams;
use crate::error::{invalid, Error, Result};
use crate::network::NormalizedNetwork;
use crate::rng::{stream_rng, SimRng};

pub const DEFAULT_BURN_IN: usize = 500;

/// Simulated observations with the latent states that generated them.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub panel: PanelSeries,
    pub latent: LatentPanels,
}

/// Forward simulation of `r²_it = ε_it h_it`, `RM_it = ϵ_it μ_it`.
///
/// The chain starts at the unconditional level `(I - B)^{-1} w` and the first
/// `burn_in` days are discarded.
pub fn simulate_nheavy(
    params: &NheavyParams,
    w: &NormalizedNetwork,
    t_len: usize,
    innov: &InnovationSpec,
    burn_in: usize,
    seed: u64,
) -> Result<Simulation> {
    simulate_nheavy_with(params, w, t_len, innov, burn_in, &mut stream_rng(seed, 0))
}

pub fn simulate_nheavy_with(
    params: &NheavyParams,
    w: &NormalizedNetwork,
    t_len: usize,
    innov: &InnovationSpec,
    burn_in: usize,
    rng: &mut SimRng,
) -> Result<Simulation> {
    params.validate()?;
    innov.validate()?;
    if t_len == 0 {
        return invalid("t_len must be positive");
    }
    let report = check_stationarity(params, w);
    if !report.stationary {
        return Err(Error::NonStationary { spectral_radius: report.spectral_radius, bound: report.bound });
    }
    let n = w.n();
    let (mut h_prev, mut mu_prev) = unconditional_mean(params, w)?;
    let mut rm_prev = mu_prev.clone();
    let mut wrm = vec![0.0; n];
    let (phi, phr) = (params.phi, params.phi_r);
    let mut out = [Panel::zeros(t_len, n), Panel::zeros(t_len, n), Panel::zeros(t_len, n), Panel::zeros(t_len, n)];
    let mut h = vec![0.0; n];
    let mut mu = vec![0.0; n];
    let mut r2 = vec![0.0; n];
    let mut rm = vec![0.0; n];
    for step in 0..burn_in + t_len {
        w.apply_into(&rm_prev, &mut wrm);
        for i in 0..n {
            h[i] = phi.omega + phi.alpha * rm_prev[i] + phi.lambda * wrm[i] + phi.beta * h_prev[i];
            mu[i] = phr.omega + phr.alpha * rm_prev[i] + phr.lambda * wrm[i] + phr.beta * mu_prev[i];
            let (eps, eps_r) = innov.sample(rng);
            r2[i] = eps * h[i];
            rm[i] = eps_r * mu[i];
        }
        if step >= burn_in {
            let t = step - burn_in;
            for (panel, v) in out.iter_mut().zip([&r2, &rm, &h, &mu]) {
                panel.row_mut(t).copy_from_slice(v);
            }
        }
        std::mem::swap(&mut h_prev, &mut h);
        std::mem::swap(&mut mu_prev, &mut mu);
        std::mem::swap(&mut rm_prev, &mut rm);
    }
    let [r2, rm, h, mu] = out;
    Ok(Simulation { panel: PanelSeries::new(r2, rm)?, latent: LatentPanels { h, mu } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{filter, EquationParams, FilterInit};
    use crate::network::{normalize, AdjacencyMatrix};

    fn setup() -> (NheavyParams, NormalizedNetwork) {
        let p = NheavyParams::new(EquationParams::new(0.05, 0.3, 0.2, 0.4), EquationParams::new(0.1, 0.3, 0.2, 0.3));
        (p, normalize(&AdjacencyMatrix::sectors(&[2, 3])))
    }

    #[test]
    fn degenerate_innovations_give_exact_states() {
        let (p, w) = setup();
        let sim = simulate_nheavy(&p, &w, 50, &InnovationSpec::degenerate(), 20, 3).unwrap();
        assert_eq!(sim.panel.r2, sim.latent.h);
        assert_eq!(sim.panel.rm, sim.latent.mu);
    }

    #[test]
    fn filter_reproduces_latent_states() {
        let (p, w) = setup();
        let sim = simulate_nheavy(&p, &w, 80, &InnovationSpec::default(), 10, 4).unwrap();
        let init = FilterInit { h: sim.latent.h.row(0).to_vec(), mu: sim.latent.mu.row(0).to_vec() };
        let lat = filter(&p, &w, &sim.panel, &init).unwrap();
        for (a, b) in lat.h.as_slice().iter().zip(sim.latent.h.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
        for (a, b) in lat.mu.as_slice().iter().zip(sim.latent.mu.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn reproducible_and_refuses_nonstationary() {
        let (p, w) = setup();
        let a = simulate_nheavy(&p, &w, 30, &InnovationSpec::default(), 5, 9).unwrap();
        let b = simulate_nheavy(&p, &w, 30, &InnovationSpec::default(), 5, 9).unwrap();
        assert_eq!(a.panel, b.panel);
        let mut bad = p;
        bad.phi_r.beta = 0.6;
        assert!(simulate_nheavy(&bad, &w, 30, &InnovationSpec::default(), 5, 9).is_err());
    }
}
