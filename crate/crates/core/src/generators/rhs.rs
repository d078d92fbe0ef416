use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{norm2, MatrixOps};
use crate::rng;

/// `b = A x_true` with `x_true` standard normal.
pub fn consistent_rhs<M: MatrixOps>(a: &M, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = rng::seeded(seed);
    let x: Vec<f64> = (0..a.ncols()).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok((a.matvec(&x)?, x))
}

/// `b = A x_true + eta |A x_true| g / |g|` with `g` standard normal.
pub fn noisy_rhs<M: MatrixOps>(a: &M, eta: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level must be >= 0, got {eta}")));
    }
    let (mut b, x) = consistent_rhs(a, seed)?;
    let mut rng = rng::seeded(rng::derive_seed(seed, 1));
    let g: Vec<f64> = (0..b.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let scale = eta * norm2(&b) / norm2(&g);
    for (bi, gi) in b.iter_mut().zip(&g) {
        *bi += scale * gi;
    }
    Ok((b, x))
}
