//! Random network designs used in the simulation studies.
//!
//! All three generators are pure functions of their arguments and a seed; the
//! seed drives a dedicated [`SimRng`](crate::rng::SimRng) stream and the order
//! of draws is fixed, so identical inputs give identical graphs.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AdjacencyMatrix;
use crate::error::{invalid, Result};
use crate::rng::{stream_rng, SimRng};

/// Generator selection with its shape parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NetworkKind {
    Dyad,
    Powerlaw { alpha: f64 },
    Sbm { k: usize },
}

impl NetworkKind {
    pub fn generate(&self, n: usize, seed: u64) -> Result<AdjacencyMatrix> {
        self.generate_with(n, &mut stream_rng(seed, 0))
    }

    pub fn generate_with(&self, n: usize, rng: &mut SimRng) -> Result<AdjacencyMatrix> {
        match *self {
            NetworkKind::Dyad => gen_dyad_with(n, rng),
            NetworkKind::Powerlaw { alpha } => gen_powerlaw_with(n, alpha, rng),
            NetworkKind::Sbm { k } => gen_sbm_with(n, k, rng),
        }
    }

    pub fn expected_density(&self, n: usize) -> Result<f64> {
        match *self {
            NetworkKind::Dyad => expected_density_dyad(n),
            NetworkKind::Powerlaw { alpha } => expected_density_powerlaw(n, alpha),
            NetworkKind::Sbm { k } => expected_density_sbm(n, k),
        }
    }
}

/// `(P(1,1), P(1,0))` for the dyad design; `P(0,1)` equals `P(1,0)`.
fn dyad_probabilities(n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return invalid(format!("dyad design needs n >= 2, got {n}"));
    }
    let nf = n as f64;
    let mutual = 20.0 / nf;
    let single = 0.5 * nf.powf(-0.8);
    let total = mutual + 2.0 * single;
    if !(0.0..=1.0).contains(&mutual) || total > 1.0 {
        return invalid(format!(
            "dyad probabilities invalid for n={n}: P(1,1)={mutual:.4}, total edge mass {total:.4} > 1"
        ));
    }
    Ok((mutual, single))
}

/// Dyad-independence network: every unordered pair `i < j` independently
/// takes `(a_ij, a_ji) = (1,1)` with probability `20/n`, `(1,0)` and `(0,1)`
/// each with probability `0.5 n^-0.8`, and `(0,0)` otherwise.
pub fn gen_dyad(n: usize, seed: u64) -> Result<AdjacencyMatrix> {
    gen_dyad_with(n, &mut stream_rng(seed, 0))
}

fn gen_dyad_with(n: usize, rng: &mut SimRng) -> Result<AdjacencyMatrix> {
    let (mutual, single) = dyad_probabilities(n)?;
    let mut out = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let u: f64 = rng.random();
            if u < mutual {
                out[i].push(j);
                out[j].push(i);
            } else if u < mutual + single {
                out[i].push(j);
            } else if u < mutual + 2.0 * single {
                out[j].push(i);
            }
        }
    }
    for row in &mut out {
        row.sort_unstable();
    }
    Ok(AdjacencyMatrix::from_sorted_rows(out))
}

pub fn expected_density_dyad(n: usize) -> Result<f64> {
    let (mutual, single) = dyad_probabilities(n)?;
    Ok(mutual + single)
}

/// `P(d = k) ∝ k^-alpha` on `k = 1, ..., n-1`.
pub fn powerlaw_degree_pmf(n: usize, alpha: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return invalid(format!("power-law design needs n >= 2, got {n}"));
    }
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return invalid(format!("power-law exponent must be >= 1, got {alpha}"));
    }
    let w: Vec<f64> = (1..n).map(|k| (k as f64).powf(-alpha)).collect();
    let c: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / c).collect())
}

/// Power-law network: node `i` draws an in-degree `d_i` from
/// [`powerlaw_degree_pmf`] and then `d_i` distinct followers `j` uniformly
/// from the other nodes, setting `a_ji = 1`.
pub fn gen_powerlaw(n: usize, alpha: f64, seed: u64) -> Result<AdjacencyMatrix> {
    gen_powerlaw_with(n, alpha, &mut stream_rng(seed, 0))
}

fn gen_powerlaw_with(n: usize, alpha: f64, rng: &mut SimRng) -> Result<AdjacencyMatrix> {
    let pmf = powerlaw_degree_pmf(n, alpha)?;
    let degree = WeightedIndex::new(&pmf).expect("pmf weights are positive");
    let mut out = vec![Vec::new(); n];
    for i in 0..n {
        let d = degree.sample(rng) + 1;
        for pick in index::sample(rng, n - 1, d).into_iter() {
            let j = if pick >= i { pick + 1 } else { pick };
            out[j].push(i);
        }
    }
    for row in &mut out {
        row.sort_unstable();
    }
    Ok(AdjacencyMatrix::from_sorted_rows(out))
}

pub fn expected_density_powerlaw(n: usize, alpha: f64) -> Result<f64> {
    let pmf = powerlaw_degree_pmf(n, alpha)?;
    let mean: f64 = pmf.iter().enumerate().map(|(k, p)| (k + 1) as f64 * p).sum();
    Ok(mean / (n - 1) as f64)
}

fn sbm_probabilities(n: usize, k: usize) -> Result<(f64, f64)> {
    if k == 0 || k > n {
        return invalid(format!("block count must satisfy 1 <= k <= n, got k={k}, n={n}"));
    }
    let nf = n as f64;
    Ok((0.3 * nf.powf(-0.3), 0.3 / nf))
}

/// Stochastic block model: labels uniform on `k` blocks, then independent
/// edges with probability `0.3 n^-0.3` inside a block and `0.3/n` across.
pub fn gen_sbm(n: usize, k: usize, seed: u64) -> Result<AdjacencyMatrix> {
    gen_sbm_with(n, k, &mut stream_rng(seed, 0))
}

fn gen_sbm_with(n: usize, k: usize, rng: &mut SimRng) -> Result<AdjacencyMatrix> {
    let (p_in, p_out) = sbm_probabilities(n, k)?;
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let mut out = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                out[i].push(j);
            }
        }
    }
    Ok(AdjacencyMatrix::from_sorted_rows(out))
}

pub fn expected_density_sbm(n: usize, k: usize) -> Result<f64> {
    let (p_in, p_out) = sbm_probabilities(n, k)?;
    let same = 1.0 / k as f64;
    Ok(same * p_in + (1.0 - same) * p_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{density, out_degrees};

    fn well_formed(a: &AdjacencyMatrix, n: usize) {
        assert_eq!(a.n(), n);
        for i in 0..n {
            assert!(!a.has_edge(i, i));
            assert!(a.neighbors(i).windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn generators_are_deterministic_and_well_formed() {
        for kind in [NetworkKind::Dyad, NetworkKind::Powerlaw { alpha: 2.0 }, NetworkKind::Sbm { k: 5 }] {
            let a = kind.generate(30, 11).unwrap();
            let b = kind.generate(30, 11).unwrap();
            assert_eq!(a, b);
            well_formed(&a, 30);
            assert_ne!(a, kind.generate(30, 12).unwrap());
        }
    }

    #[test]
    fn dyad_rejects_small_n() {
        // 20/21 + 21^-0.8 exceeds one.
        assert!(gen_dyad(21, 0).is_err());
        assert!(gen_dyad(22, 0).is_ok());
        assert!((expected_density_dyad(25).unwrap() - 0.838_073).abs() < 1e-6);
    }

    #[test]
    fn powerlaw_two_nodes_is_forced() {
        let a = gen_powerlaw(2, 3.0, 5).unwrap();
        assert_eq!(density(&a).unwrap(), 1.0);
        assert!(gen_powerlaw(10, 0.5, 0).is_err());
    }

    #[test]
    fn powerlaw_in_degrees_follow_draws() {
        let a = gen_powerlaw(40, 1.0, 3).unwrap();
        let mut indeg = vec![0usize; 40];
        for (_, j) in a.edges() {
            indeg[j] += 1;
        }
        assert!(indeg.iter().all(|&d| (1..40).contains(&d)));
        assert_eq!(indeg.iter().sum::<usize>(), out_degrees(&a).iter().sum::<usize>());
    }

    #[test]
    fn sbm_single_block_uses_within_probability() {
        assert!(gen_sbm(25, 30, 0).is_err());
        assert!(gen_sbm(25, 0, 0).is_err());
        let p_in = 0.3 * 25f64.powf(-0.3);
        assert!((expected_density_sbm(25, 1).unwrap() - p_in).abs() < 1e-15);
        assert!((expected_density_sbm(25, 5).unwrap() - 0.032_44).abs() < 1e-4);
    }
}
