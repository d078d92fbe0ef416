use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};
use crate::rng;

/// `m x n` matrix of i.i.d. standard normals.
pub fn gen_gaussian(m: usize, n: usize, seed: u64) -> Result<DenseMatrix> {
    if n < 1 || m < n {
        return Err(Error::InvalidParameter(format!("gaussian needs m >= n >= 1, got {m}x{n}")));
    }
    let mut rng = rng::seeded(seed);
    let data = (0..m * n).map(|_| StandardNormal.sample(&mut rng)).collect();
    DenseMatrix::new(m, n, data)
}

/// Block diagonal `[[G, 0], [0, I]]`: `G` Gaussian of size `(m - n/2) x n/2`,
/// `I` the identity of order `n/2`. The identity rows make the matrix
/// maximally coherent.
pub fn gen_semi_gaussian(m: usize, n: usize, seed: u64) -> Result<SparseMatrix> {
    if !n.is_multiple_of(2) || n == 0 {
        return Err(Error::InvalidParameter(format!("semi-gaussian needs even n, got {n}")));
    }
    if m <= n {
        return Err(Error::InvalidParameter(format!("semi-gaussian needs m > n, got {m}x{n}")));
    }
    let h = n / 2;
    let g_rows = m - h;
    let mut rng = rng::seeded(seed);
    let mut trips = Vec::with_capacity(g_rows * h + h);
    for i in 0..g_rows {
        for j in 0..h {
            trips.push((i, j, StandardNormal.sample(&mut rng)));
        }
    }
    for k in 0..h {
        trips.push((g_rows + k, h + k, 1.0));
    }
    SparseMatrix::from_triplets(m, n, &trips)
}

/// `Z = [I_n; 0]`, the `m x n` matrix with coherence 1 and condition number 1.
pub fn coherent_matrix(m: usize, n: usize) -> Result<SparseMatrix> {
    if m < n {
        return Err(Error::InvalidParameter(format!("coherent matrix needs m >= n, got {m}x{n}")));
    }
    let trips: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
    SparseMatrix::from_triplets(m, n, &trips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gram_dense, symmetric_eigenvalues};
    use crate::matrix::MatrixOps;

    #[test]
    fn gaussian_mean_is_near_zero() {
        let a = gen_gaussian(1000, 1000, 5).unwrap();
        let mean = a.data().iter().sum::<f64>() / 1e6;
        assert!(mean.abs() <= 0.003, "{mean}");
    }

    #[test]
    fn gaussian_is_deterministic() {
        assert_eq!(gen_gaussian(20, 4, 1).unwrap(), gen_gaussian(20, 4, 1).unwrap());
        assert_ne!(gen_gaussian(20, 4, 1).unwrap(), gen_gaussian(20, 4, 2).unwrap());
    }

    #[test]
    fn gaussian_condition_number_tracks_limit() {
        for (m, n) in [(3000, 109), (10000, 200)] {
            let a = gen_gaussian(m, n, 1).unwrap();
            let ev = symmetric_eigenvalues(gram_dense(&a)).unwrap();
            let kappa = ev[ev.len() - 1] / ev[0];
            let (sm, sn) = ((m as f64).sqrt(), (n as f64).sqrt());
            let limit = ((sm + sn) / (sm - sn)).powi(2);
            assert!((kappa / limit - 1.0).abs() <= 0.25, "{m}x{n}: {kappa} vs {limit}");
        }
    }

    #[test]
    fn semi_gaussian_structure() {
        let (m, n) = (100, 10);
        let a = gen_semi_gaussian(m, n, 3).unwrap();
        assert_eq!((a.nrows(), a.ncols()), (m, n));
        assert_eq!(a.nnz(), (m - 5) * 5 + 5);
        let g = gram_dense(&a);
        for j in 0..5 {
            for k in 5..10 {
                assert_eq!(g[(j, k)], 0.0);
            }
        }
        for j in 5..10 {
            for k in 5..10 {
                assert_eq!(g[(j, k)], if j == k { 1.0 } else { 0.0 });
            }
        }
        assert!(gen_semi_gaussian(100, 11, 0).is_err());
    }

    #[test]
    fn coherent_matrix_shape() {
        let z = coherent_matrix(100, 10).unwrap();
        assert_eq!(z.nnz(), 10);
        assert_eq!(z.column_norms(), vec![1.0; 10]);
    }
}
