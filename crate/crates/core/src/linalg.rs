//! Small dense kernels: Gram products, Cholesky, and a symmetric eigensolve.
//!
//! These serve the verification oracle and the diagnostics; the iterative
//! solvers never call them.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::MatrixOps;

/// Relative pivot threshold below which a Gram matrix is declared rank deficient.
pub const CHOLESKY_PIVOT_TOL: f64 = 1e-12;

/// Dense `A^T A` as a nalgebra matrix.
pub fn gram_dense<M: MatrixOps>(a: &M) -> DMatrix<f64> {
    let n = a.ncols();
    let mut g = DMatrix::<f64>::zeros(n, n);
    let mut row = Vec::with_capacity(n);
    for i in 0..a.nrows() {
        row.clear();
        a.for_each_in_row(i, |j, v| {
            if v != 0.0 {
                row.push((j, v));
            }
        });
        for (p, &(j, vj)) in row.iter().enumerate() {
            for &(k, vk) in &row[p..] {
                g[(j, k)] += vj * vk;
            }
        }
    }
    for j in 0..n {
        for k in j + 1..n {
            g[(k, j)] = g[(j, k)];
        }
    }
    g
}

/// Lower Cholesky factor `L` with `G = L L^T`, stored row-major.
///
/// Fails with [`Error::RankDeficient`] when a pivot drops to
/// `CHOLESKY_PIVOT_TOL * max(diag)` or below.
pub fn cholesky(g: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = g.len();
    let max_diag = (0..n).map(|i| g[i][i]).fold(0.0f64, f64::max);
    let guard = CHOLESKY_PIVOT_TOL * max_diag;
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut d = g[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d <= guard || !d.is_finite() {
            return Err(Error::RankDeficient { column: j, pivot: d });
        }
        let d = d.sqrt();
        l[j][j] = d;
        for i in j + 1..n {
            let mut s = g[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn forward_substitute(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    y
}

/// Solves `L^T x = y` for lower-triangular `L`.
pub fn backward_substitute(l: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

/// Solves `G x = b` for symmetric positive definite `G`.
pub fn cholesky_solve(g: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky(g)?;
    Ok(backward_substitute(&l, &forward_substitute(&l, b)))
}

pub fn to_rows(g: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..g.nrows())
        .map(|i| (0..g.ncols()).map(|j| g[(i, j)]).collect())
        .collect()
}

/// Eigenvalues in ascending order with matching eigenvectors (as columns).
pub fn symmetric_eigen(g: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = g.nrows();
    let eig = SymmetricEigen::try_new(g, f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Eigenvalues only, ascending.
pub fn symmetric_eigenvalues(g: DMatrix<f64>) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = g.symmetric_eigenvalues().iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenFailure);
    }
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Spectral norm of a symmetric matrix: the largest absolute eigenvalue.
pub fn symmetric_spectral_norm(g: DMatrix<f64>) -> Result<f64> {
    let v = symmetric_eigenvalues(g)?;
    Ok(v.first().map_or(0.0, |a| a.abs()).max(v.last().map_or(0.0, |b| b.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_small_system() {
        let g = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let x = cholesky_solve(&g, &[2.0, 1.0]).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_detects_singular() {
        let g = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(cholesky(&g), Err(Error::RankDeficient { column: 1, .. })));
    }

    #[test]
    fn eigen_sorted() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = symmetric_eigen(g.clone()).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let v = vecs.column(1);
        assert!((v[0].abs() - v[1].abs()).abs() < 1e-14);
        assert!((symmetric_spectral_norm(g).unwrap() - 3.0).abs() < 1e-14);
    }
}
