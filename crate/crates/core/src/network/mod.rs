//! Stock-relatedness networks.
//!
//! An [`AdjacencyMatrix`] is a directed 0/1 relation with an empty diagonal,
//! stored as sorted out-neighbour lists. Row-normalising it gives the
//! [`NormalizedNetwork`] `W = D⁻¹A` that enters both volatility recursions:
//! row `i` averages the neighbours of asset `i` and is identically zero when
//! the asset has no neighbours.

mod generators;
mod io;

pub use generators::{
    expected_density_dyad, expected_density_powerlaw, expected_density_sbm, gen_dyad, gen_powerlaw, gen_sbm,
    powerlaw_degree_pmf, NetworkKind,
};
pub use io::{read_edge_csv, write_edge_csv};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Directed binary network with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EdgeListRepr", into = "EdgeListRepr")]
pub struct AdjacencyMatrix {
    n: usize,
    out: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct EdgeListRepr {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<EdgeListRepr> for AdjacencyMatrix {
    type Error = crate::Error;
    fn try_from(r: EdgeListRepr) -> Result<Self> {
        AdjacencyMatrix::from_edges(r.n, r.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl From<AdjacencyMatrix> for EdgeListRepr {
    fn from(a: AdjacencyMatrix) -> Self {
        EdgeListRepr { n: a.n, edges: a.edges().map(|(i, j)| [i, j]).collect() }
    }
}

impl AdjacencyMatrix {
    /// Graph on `n` nodes with no edges.
    pub fn empty(n: usize) -> Self {
        Self { n, out: vec![Vec::new(); n] }
    }

    /// Complete directed graph (every off-diagonal entry is one).
    pub fn complete(n: usize) -> Self {
        let out = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        Self { n, out }
    }

    /// Sector network: consecutive blocks of the given sizes, complete within
    /// each block and empty across blocks.
    pub fn sectors(sizes: &[usize]) -> Self {
        let n = sizes.iter().sum();
        let mut out = vec![Vec::new(); n];
        let mut start = 0;
        for &size in sizes {
            for i in start..start + size {
                out[i] = (start..start + size).filter(|&j| j != i).collect();
            }
            start += size;
        }
        Self { n, out }
    }

    /// Build from `(src, dst)` pairs. Duplicates collapse to one edge.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut out = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return invalid(format!("edge ({i},{j}) out of bounds for n={n}"));
            }
            if i == j {
                return invalid(format!("self-loop at node {i}: diagonal must be zero"));
            }
            out[i].push(j);
        }
        for row in &mut out {
            row.sort_unstable();
            row.dedup();
        }
        Ok(Self { n, out })
    }

    /// Build from a dense 0/1 matrix given row by row.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut edges = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return invalid(format!("row {i} has {} entries, expected {n}", row.len()));
            }
            for (j, &a) in row.iter().enumerate() {
                match a {
                    0 => {}
                    1 => edges.push((i, j)),
                    other => return invalid(format!("entry ({i},{j}) = {other} is not binary")),
                }
            }
        }
        Self::from_edges(n, edges)
    }

    pub(crate) fn from_sorted_rows(out: Vec<Vec<usize>>) -> Self {
        Self { n: out.len(), out }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.out[i].binary_search(&j).is_ok()
    }

    /// Out-neighbours of `i` in increasing order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.out[i]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out.iter().enumerate().flat_map(|(i, row)| row.iter().map(move |&j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j) in self.edges() {
            m[(i, j)] = 1.0;
        }
        m
    }
}

/// `d_i = Σ_j a_ij`.
pub fn out_degrees(a: &AdjacencyMatrix) -> Vec<usize> {
    a.out.iter().map(Vec::len).collect()
}

/// Fraction of realised directed edges, `Σ a_ij / (N(N-1))`.
pub fn density(a: &AdjacencyMatrix) -> Result<f64> {
    if a.n < 2 {
        return invalid(format!("density needs at least two nodes, got {}", a.n));
    }
    Ok(a.edge_count() as f64 / (a.n * (a.n - 1)) as f64)
}

/// Row-normalised network `W = D⁻¹A`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedNetwork {
    neighbors: Vec<Vec<usize>>,
    degrees: Vec<usize>,
}

pub fn normalize(a: &AdjacencyMatrix) -> NormalizedNetwork {
    NormalizedNetwork { neighbors: a.out.clone(), degrees: out_degrees(a) }
}

impl NormalizedNetwork {
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if self.neighbors[i].binary_search(&j).is_ok() {
            1.0 / self.degrees[i] as f64
        } else {
            0.0
        }
    }

    /// `out = W x`. Rows of isolated nodes are zero.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n());
        for (i, (nb, o)) in self.neighbors.iter().zip(out.iter_mut()).enumerate() {
            *o = if nb.is_empty() { 0.0 } else { nb.iter().map(|&j| x[j]).sum::<f64>() / self.degrees[i] as f64 };
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for (i, nb) in self.neighbors.iter().enumerate() {
            for &j in nb {
                m[(i, j)] = 1.0 / self.degrees[i] as f64;
            }
        }
        m
    }
}
