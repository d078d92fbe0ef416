//! Dense and CSR matrices, the products the solvers need, and Matrix Market I/O.
//!
//! Every matrix type implements [`MatrixOps`]. Products are accumulated
//! sequentially in ascending row order (and ascending column order within a
//! row), so results are bit-reproducible across runs.

mod dense;
mod mm;
mod sparse;

pub use dense::DenseMatrix;
pub use mm::{read_matrix_market, write_matrix_market};
pub use sparse::SparseMatrix;

use crate::error::{Error, Result};

/// Operations shared by the dense and sparse storage formats.
pub trait MatrixOps: Sized {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// Number of structurally nonzero entries.
    fn nnz(&self) -> usize;

    /// `y = A x`, no dimension checks.
    fn matvec_into(&self, x: &[f64], y: &mut [f64]);
    /// `x = A^T y`, no dimension checks.
    fn transpose_matvec_into(&self, y: &[f64], x: &mut [f64]);

    /// Calls `f(col, value)` for each stored entry of row `i`, in ascending column order.
    fn for_each_in_row<F: FnMut(usize, f64)>(&self, i: usize, f: F);

    /// Returns `A * diag(scale)`.
    fn scale_columns(&self, scale: &[f64]) -> Self;

    /// Builds the matrix whose row `t` is `weights[t] * a_{indices[t]}`.
    fn gather_scaled_rows(&self, indices: &[usize], weights: &[f64]) -> Result<Self>;

    fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("matvec", self.ncols(), x.len())?;
        let mut y = vec![0.0; self.nrows()];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    fn transpose_matvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("transpose_matvec", self.nrows(), y.len())?;
        let mut x = vec![0.0; self.ncols()];
        self.transpose_matvec_into(y, &mut x);
        Ok(x)
    }

    fn row_squared_norms(&self) -> Vec<f64> {
        (0..self.nrows())
            .map(|i| {
                let mut acc = 0.0;
                self.for_each_in_row(i, |_, v| acc += v * v);
                acc
            })
            .collect()
    }

    fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.ncols()];
        for i in 0..self.nrows() {
            self.for_each_in_row(i, |j, v| sq[j] += v * v);
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    fn frobenius_norm(&self) -> f64 {
        self.row_squared_norms().iter().sum::<f64>().sqrt()
    }

    /// Scales every column to unit Euclidean norm.
    ///
    /// Returns the scaled matrix and the original column norms `d`, so that
    /// `A = result * diag(d)`.
    fn normalize_columns(&self) -> Result<(Self, Vec<f64>)> {
        let norms = self.column_norms();
        if let Some(j) = norms.iter().position(|&d| d == 0.0) {
            return Err(Error::ZeroColumn(j));
        }
        let inv: Vec<f64> = norms.iter().map(|d| 1.0 / d).collect();
        Ok((self.scale_columns(&inv), norms))
    }
}

pub(crate) fn check_len(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            op,
            expected,
            found,
        });
    }
    Ok(())
}

/// A matrix in either storage format.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

impl Matrix {
    pub fn is_sparse(&self) -> bool {
        matches!(self, Matrix::Sparse(_))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Matrix::Dense(d) => d.clone(),
            Matrix::Sparse(s) => s.to_dense(),
        }
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        match self {
            Matrix::Dense(d) => d.to_sparse(),
            Matrix::Sparse(s) => s.clone(),
        }
    }
}

impl From<DenseMatrix> for Matrix {
    fn from(m: DenseMatrix) -> Self {
        Matrix::Dense(m)
    }
}

impl From<SparseMatrix> for Matrix {
    fn from(m: SparseMatrix) -> Self {
        Matrix::Sparse(m)
    }
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Matrix::Dense($m) => $e,
            Matrix::Sparse($m) => $e,
        }
    };
}

impl MatrixOps for Matrix {
    fn nrows(&self) -> usize {
        dispatch!(self, m => m.nrows())
    }
    fn ncols(&self) -> usize {
        dispatch!(self, m => m.ncols())
    }
    fn nnz(&self) -> usize {
        dispatch!(self, m => m.nnz())
    }
    fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        dispatch!(self, m => m.matvec_into(x, y))
    }
    fn transpose_matvec_into(&self, y: &[f64], x: &mut [f64]) {
        dispatch!(self, m => m.transpose_matvec_into(y, x))
    }
    fn for_each_in_row<F: FnMut(usize, f64)>(&self, i: usize, f: F) {
        dispatch!(self, m => m.for_each_in_row(i, f))
    }
    fn scale_columns(&self, scale: &[f64]) -> Self {
        match self {
            Matrix::Dense(m) => Matrix::Dense(m.scale_columns(scale)),
            Matrix::Sparse(m) => Matrix::Sparse(m.scale_columns(scale)),
        }
    }
    fn gather_scaled_rows(&self, indices: &[usize], weights: &[f64]) -> Result<Self> {
        Ok(match self {
            Matrix::Dense(m) => Matrix::Dense(m.gather_scaled_rows(indices, weights)?),
            Matrix::Sparse(m) => Matrix::Sparse(m.gather_scaled_rows(indices, weights)?),
        })
    }
    fn row_squared_norms(&self) -> Vec<f64> {
        dispatch!(self, m => m.row_squared_norms())
    }
    fn column_norms(&self) -> Vec<f64> {
        dispatch!(self, m => m.column_norms())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_dense(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn normalize_rejects_zero_column() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![3.0, 0.0, 1.0]]).unwrap();
        match a.normalize_columns() {
            Err(Error::ZeroColumn(1)) => {}
            other => panic!("expected zero column 1, got {other:?}"),
        }
        let s = Matrix::Sparse(a.to_sparse());
        assert!(matches!(s.normalize_columns(), Err(Error::ZeroColumn(1))));
    }

    #[test]
    fn normalize_examples() {
        let a = DenseMatrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let (b, d) = a.normalize_columns().unwrap();
        assert_eq!(d, vec![5.0]);
        assert!((b.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((b.get(1, 0) - 0.8).abs() < 1e-15);

        let (i3, d) = DenseMatrix::identity(3).normalize_columns().unwrap();
        assert_eq!(i3, DenseMatrix::identity(3));
        assert_eq!(d, vec![1.0; 3]);
    }

    #[test]
    fn enum_dispatch_matches_inner() {
        let a = random_dense(9, 4, 3);
        let x = [0.5, -1.0, 2.0, 0.25];
        let m = Matrix::Sparse(a.to_sparse());
        assert_eq!(m.nnz(), 36);
        let y1 = a.matvec(&x).unwrap();
        let y2 = m.matvec(&x).unwrap();
        for (u, v) in y1.iter().zip(&y2) {
            assert!((u - v).abs() < 1e-12);
        }
        assert!(m.matvec(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn adjoint_identity(rows in 1usize..12, cols in 1usize..8, seed in any::<u64>()) {
            let a = random_dense(rows, cols, seed);
            let u: Vec<f64> = (0..cols).map(|j| (j as f64 * 0.37).sin()).collect();
            let v: Vec<f64> = (0..rows).map(|i| (i as f64 * 1.1).cos()).collect();
            let lhs = dot(&a.matvec(&u).unwrap(), &v);
            let rhs = dot(&u, &a.transpose_matvec(&v).unwrap());
            let scale = a.frobenius_norm() * norm2(&u) * norm2(&v);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale.max(1e-300));
        }

        #[test]
        fn sparse_dense_agreement(rows in 1usize..15, cols in 1usize..10, seed in any::<u64>()) {
            let mut a = random_dense(rows, cols, seed);
            // zero out roughly half the entries
            for i in 0..rows {
                for j in 0..cols {
                    if (i * 7 + j * 3 + seed as usize).is_multiple_of(2) {
                        a.set(i, j, 0.0);
                    }
                }
            }
            let s = a.to_sparse();
            s.validate().unwrap();
            let x: Vec<f64> = (0..cols).map(|j| 1.0 + j as f64).collect();
            let y: Vec<f64> = (0..rows).map(|i| 1.0 - i as f64).collect();
            for (p, q) in a.matvec(&x).unwrap().iter().zip(s.matvec(&x).unwrap()) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
            for (p, q) in a.transpose_matvec(&y).unwrap().iter().zip(s.transpose_matvec(&y).unwrap()) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }

        #[test]
        fn normalized_columns_have_unit_norm(rows in 2usize..20, cols in 1usize..8, seed in any::<u64>()) {
            let a = random_dense(rows, cols, seed);
            let (b, _) = a.normalize_columns().unwrap();
            for c in b.column_norms() {
                prop_assert!((c - 1.0).abs() <= 1e-12);
            }
            let f = b.frobenius_norm();
            prop_assert!((f * f - cols as f64).abs() <= 1e-10);
        }
    }
}
