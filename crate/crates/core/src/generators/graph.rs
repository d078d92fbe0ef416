use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{MatrixOps, SparseMatrix};
use crate::rng::{self, derive_seed};

/// Vertices shared by two glued graphs.
pub const GLUE_OVERLAP: usize = 5;

/// Parameters of one power-law random graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n: usize,
    pub beta: f64,
    pub d: f64,
    /// Index offset of the weight sequence.
    pub i0: f64,
}

impl GraphSpec {
    /// Offset derived from a target maximum degree `max_deg`:
    /// `i0 = n [d (beta - 2) / (max_deg (beta - 1))]^(beta - 1)`.
    pub fn with_max_degree(n: usize, beta: f64, d: f64, max_deg: f64) -> Result<Self> {
        Ok(Self {
            n,
            beta,
            d,
            i0: i0_from_max_degree(n, beta, d, max_deg)?,
        })
    }

    /// The sparse, ill-conditioned component: `beta = 5`, `d = 30`, `i0 = 11`.
    pub fn sparse_component(n: usize) -> Self {
        Self { n, beta: 5.0, d: 30.0, i0: 11.0 }
    }

    /// The dense, well-conditioned component: `beta = 8`, `d = 5 n`, `i0 = 11`.
    pub fn dense_component(n: usize) -> Self {
        Self {
            n,
            beta: 8.0,
            d: 5.0 * n as f64,
            i0: 11.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("graph needs n >= 2, got {}", self.n)));
        }
        if !(self.beta > 2.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must exceed 2, got {}", self.beta)));
        }
        if !(self.d >= 1.0 && self.d.is_finite()) {
            return Err(Error::InvalidParameter(format!("d must be >= 1, got {}", self.d)));
        }
        if !(self.i0 > 0.0 && self.i0.is_finite()) {
            return Err(Error::InvalidParameter(format!("i0 must be positive, got {}", self.i0)));
        }
        Ok(())
    }

    /// `w_i = c i^{-1/(beta-1)}` for `i = i0, ..., i0 + n - 1`, with
    /// `c = (beta-2)/(beta-1) d n^{-1/(beta-1)}`.
    pub fn weights(&self) -> Vec<f64> {
        let e = 1.0 / (self.beta - 1.0);
        let c = (self.beta - 2.0) / (self.beta - 1.0) * self.d * (self.n as f64).powf(-e);
        (0..self.n).map(|k| c * (self.i0 + k as f64).powf(-e)).collect()
    }
}

pub fn i0_from_max_degree(n: usize, beta: f64, d: f64, max_deg: f64) -> Result<f64> {
    if !(max_deg > 0.0) || !(beta > 2.0) {
        return Err(Error::InvalidParameter("max degree and beta - 2 must be positive".into()));
    }
    Ok(n as f64 * (d * (beta - 2.0) / (max_deg * (beta - 1.0))).powf(beta - 1.0))
}

/// A sampled power-law graph and the incidence matrix derived from it.
#[derive(Debug, Clone)]
pub struct GraphModel {
    pub spec: GraphSpec,
    pub weights: Vec<f64>,
    /// Symmetric 0/1 adjacency with zero diagonal.
    pub adjacency: SparseMatrix,
    /// Incidence of the two-hop graph, see [`build_incidence_from_square`].
    pub incidence: SparseMatrix,
}

impl GraphModel {
    /// Expected degree of each vertex under the edge probabilities actually used.
    pub fn expected_degrees(&self) -> Vec<f64> {
        edge_probabilities(&self.weights)
            .map(|probs| {
                let n = self.weights.len();
                let mut deg = vec![0.0; n];
                for (i, j, p) in probs {
                    deg[i] += p;
                    deg[j] += p;
                }
                deg
            })
            .unwrap_or_default()
    }
}

fn edge_probabilities(w: &[f64]) -> Option<impl Iterator<Item = (usize, usize, f64)> + '_> {
    let rho = 1.0 / w.iter().sum::<f64>();
    if !rho.is_finite() {
        return None;
    }
    let n = w.len();
    Some((0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j, (w[i] * w[j] * rho).min(1.0)))))
}

/// Chung-Lu style random graph: edge `{i, j}`, `i < j`, is present with
/// probability `min(w_i w_j rho, 1)`, `rho = 1 / sum(w)`.
pub fn gen_powerlaw_graph(spec: &GraphSpec, seed: u64) -> Result<GraphModel> {
    spec.validate()?;
    let n = spec.n;
    let weights = spec.weights();
    let mut rng = rng::seeded(seed);
    let mut trips = Vec::new();
    for (i, j, p) in edge_probabilities(&weights).ok_or(Error::EmptyGraph)? {
        if rng.random::<f64>() < p {
            trips.push((i, j, 1.0));
            trips.push((j, i, 1.0));
        }
    }
    let adjacency = SparseMatrix::from_triplets(n, n, &trips)?;
    let incidence = build_incidence_from_square(&adjacency)?;
    Ok(GraphModel {
        spec: spec.clone(),
        weights,
        adjacency,
        incidence,
    })
}

/// Incidence matrix of the graph whose edges are the strictly upper nonzeros
/// of `A^T A`: one row per edge `(i, j)`, `+1` in column `i`, `-1` in column `j`.
pub fn build_incidence_from_square(adjacency: &SparseMatrix) -> Result<SparseMatrix> {
    let n = adjacency.ncols();
    if adjacency.nrows() != n {
        return Err(Error::DimensionMismatch {
            op: "build_incidence_from_square",
            expected: n,
            found: adjacency.nrows(),
        });
    }
    let mut square: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for k in 0..adjacency.nrows() {
        let (idx, vals) = adjacency.row(k);
        for (p, (&i, &vi)) in idx.iter().zip(vals).enumerate() {
            for (&j, &vj) in idx[p + 1..].iter().zip(&vals[p + 1..]) {
                *square.entry((i, j)).or_insert(0.0) += vi * vj;
            }
        }
    }
    let mut trips = Vec::new();
    let mut edge = 0;
    for (&(i, j), &v) in &square {
        if v != 0.0 {
            trips.push((edge, i, 1.0));
            trips.push((edge, j, -1.0));
            edge += 1;
        }
    }
    if edge == 0 {
        return Err(Error::EmptyGraph);
    }
    SparseMatrix::from_triplets(edge, n, &trips)
}

/// Stacks two incidence matrices, identifying the last [`GLUE_OVERLAP`]
/// vertices of the first graph with the first ones of the second.
pub fn glue_graphs(b1: &SparseMatrix, b2: &SparseMatrix) -> Result<SparseMatrix> {
    let k = GLUE_OVERLAP;
    if b1.ncols() < k || b2.ncols() < k {
        return Err(Error::InvalidParameter(format!(
            "gluing needs at least {k} vertices per graph, got {} and {}",
            b1.ncols(),
            b2.ncols()
        )));
    }
    let (m1, n1) = (b1.nrows(), b1.ncols());
    let shift = n1 - k;
    let trips: Vec<_> = b1
        .triplets()
        .chain(b2.triplets().map(|(i, j, v)| (i + m1, j + shift, v)))
        .collect();
    SparseMatrix::from_triplets(m1 + b2.nrows(), n1 + b2.ncols() - k, &trips)
}

/// Drops all-zero columns (isolated vertices).
pub fn filter_isolated(b: &SparseMatrix) -> Result<SparseMatrix> {
    let empty = b.empty_columns();
    if empty.is_empty() {
        return Ok(b.clone());
    }
    let keep: Vec<usize> = (0..b.ncols()).filter(|j| empty.binary_search(j).is_err()).collect();
    b.select_columns(&keep)
}

/// Two graphs on `n0` vertices each (a sparse and a dense component),
/// glued with a five-vertex overlap, isolated vertices removed.
pub fn graph_laplacian_pipeline(first: &GraphSpec, second: &GraphSpec, seed: u64) -> Result<SparseMatrix> {
    let g1 = gen_powerlaw_graph(first, derive_seed(seed, 1))?;
    let g2 = gen_powerlaw_graph(second, derive_seed(seed, 2))?;
    filter_isolated(&glue_graphs(&g1.incidence, &g2.incidence)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;

    fn adjacency(n: usize, edges: &[(usize, usize)]) -> SparseMatrix {
        let trips: Vec<_> = edges.iter().flat_map(|&(i, j)| [(i, j, 1.0), (j, i, 1.0)]).collect();
        SparseMatrix::from_triplets(n, n, &trips).unwrap()
    }

    fn laplacian(b: &SparseMatrix) -> DenseMatrix {
        let d = b.to_dense();
        d.transpose().matmul(&d).unwrap()
    }

    fn assert_incidence_rows(b: &SparseMatrix) {
        for e in 0..b.nrows() {
            let (idx, vals) = b.row(e);
            assert_eq!(idx.len(), 2);
            assert_eq!(vals, &[1.0, -1.0]);
        }
    }

    #[test]
    fn path_graph_gains_two_hop_edge() {
        let b = build_incidence_from_square(&adjacency(3, &[(0, 1), (1, 2)])).unwrap();
        assert_eq!(b.nrows(), 1);
        assert_eq!(b.get(0, 0), 1.0);
        assert_eq!(b.get(0, 2), -1.0);
    }

    #[test]
    fn single_edge_via_triangle() {
        // the square of a triangle links every pair
        let b = build_incidence_from_square(&adjacency(3, &[(0, 1), (1, 2), (0, 2)])).unwrap();
        assert_eq!(b.nrows(), 3);
        assert_incidence_rows(&b);
        let l = laplacian(&b);
        assert_eq!(l.get(0, 0), 2.0);
        assert_eq!(l.get(0, 1), -1.0);
    }

    #[test]
    fn empty_square_is_an_error() {
        assert!(matches!(
            build_incidence_from_square(&adjacency(2, &[(0, 1)])),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn laplacian_is_degree_minus_adjacency() {
        let g = gen_powerlaw_graph(&GraphSpec::sparse_component(60), 3).unwrap();
        assert_incidence_rows(&g.incidence);
        let l = laplacian(&g.incidence);
        let n = 60;
        for i in 0..n {
            let mut deg = 0.0;
            for j in 0..n {
                if i != j {
                    let e = l.get(i, j);
                    assert!(e == 0.0 || e == -1.0);
                    deg -= e;
                }
            }
            assert_eq!(l.get(i, i), deg);
        }
    }

    #[test]
    fn adjacency_is_symmetric_without_loops() {
        let g = gen_powerlaw_graph(&GraphSpec::sparse_component(80), 9).unwrap();
        let a = g.adjacency.to_dense();
        for i in 0..80 {
            assert_eq!(a.get(i, i), 0.0);
            for j in 0..80 {
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn mean_degree_tracks_the_model() {
        let spec = GraphSpec { n: 500, beta: 5.0, d: 30.0, i0: 1.0 };
        let g = gen_powerlaw_graph(&spec, 21).unwrap();
        let expected: f64 = g.expected_degrees().iter().sum::<f64>() / 500.0;
        let observed = g.adjacency.nnz() as f64 / 500.0;
        assert!((observed - expected).abs() <= 0.1 * expected, "{observed} vs {expected}");
    }

    #[test]
    fn large_beta_flattens_weights() {
        let w = GraphSpec { n: 100, beta: 1e6, d: 5.0, i0: 1.0 }.weights();
        assert!((w[0] / w[99] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn i0_from_degree_round_trip() {
        let spec = GraphSpec::with_max_degree(100, 5.0, 30.0, 20.0).unwrap();
        let want = 100.0 * (30.0f64 * 3.0 / (20.0 * 4.0)).powi(4);
        assert!((spec.i0 - want).abs() < 1e-9);
    }

    #[test]
    fn glue_dimensions_and_laplacian() {
        let b = build_incidence_from_square(&adjacency(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])).unwrap();
        let g = glue_graphs(&b, &b).unwrap();
        assert_eq!(g.nrows(), 2 * b.nrows());
        assert_eq!(g.ncols(), 2 * 6 - 5);
        let l = laplacian(&g);
        for i in 0..g.ncols() {
            let row_sum: f64 = (0..g.ncols()).map(|j| l.get(i, j)).sum();
            assert_eq!(row_sum, 0.0);
            for j in 0..g.ncols() {
                if i != j {
                    assert!(l.get(i, j) <= 0.0);
                }
            }
        }
        assert!(glue_graphs(&b.select_columns(&[0, 1, 2]).unwrap(), &b).is_err());
    }

    #[test]
    fn filter_removes_zero_columns_only() {
        let b = build_incidence_from_square(&adjacency(3, &[(0, 1), (1, 2)])).unwrap();
        let f = filter_isolated(&b).unwrap();
        assert_eq!((f.nrows(), f.ncols()), (1, 2));
        let full = build_incidence_from_square(&adjacency(3, &[(0, 1), (1, 2), (0, 2)])).unwrap();
        assert_eq!(filter_isolated(&full).unwrap(), full);
    }

    #[test]
    fn pipeline_has_no_zero_columns() {
        let b = graph_laplacian_pipeline(&GraphSpec::sparse_component(96), &GraphSpec::dense_component(96), 2)
            .unwrap();
        assert!(b.empty_columns().is_empty());
        assert!(b.ncols() <= 187);
        assert!(b.normalize_columns().is_ok());
    }
}
