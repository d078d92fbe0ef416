use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng;

/// The arithmetic progression `1, ..., cond` of length `n`.
pub fn udv_singular_values(n: usize, cond: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|j| 1.0 + (cond - 1.0) * j as f64 / (n - 1) as f64)
        .collect()
}

fn orthonormal_factor(rows: usize, cols: usize, rng: &mut rng::Rng) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(rows, cols, |_, _| StandardNormal.sample(rng));
    g.qr().q()
}

/// `A = U D V` with `U` (`m x n`) orthonormal columns, `V` (`n x n`)
/// orthogonal, and `D` the progression from [`udv_singular_values`].
/// The singular values of `A` are exactly the entries of `D`.
pub fn gen_udv(m: usize, n: usize, cond: f64, seed: u64) -> Result<DenseMatrix> {
    if n < 1 || m < n {
        return Err(Error::InvalidParameter(format!("udv needs m >= n >= 1, got {m}x{n}")));
    }
    if !(cond >= 1.0 && cond.is_finite()) {
        return Err(Error::InvalidParameter(format!("udv needs cond >= 1, got {cond}")));
    }
    let mut rng = rng::seeded(seed);
    let u = orthonormal_factor(m, n, &mut rng);
    let mut v = orthonormal_factor(n, n, &mut rng);
    for (k, d) in udv_singular_values(n, cond).into_iter().enumerate() {
        v.row_mut(k).scale_mut(d);
    }
    let a = u * v;
    Ok(DenseMatrix::from_fn(m, n, |i, j| a[(i, j)]))
}
