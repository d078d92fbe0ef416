//! Squared-row-norm sampling.
//!
//! Row `k` is drawn with probability `p_k = |a_k|^2 / |A|_F^2`, `s` times
//! independently and with replacement. Draw `t` contributes row
//! `a_{i_t} / sqrt(s p_{i_t})` to the sampled matrix `A_s`, which makes
//! `A_s^T A_s` an unbiased estimator of `A^T A`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::MatrixOps;
use crate::rng;

/// Probabilities below this are treated as zero.
const MIN_PROB: f64 = 1e-300;

/// A probability mass function over the rows of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDensity {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SamplingDensity {
    /// The squared-row-norm density of `a`.
    pub fn from_row_norms<M: MatrixOps>(a: &M) -> Result<Self> {
        let sq = a.row_squared_norms();
        Self::from_weights(&sq).map_err(|e| match e {
            Error::InvalidParameter(_) => Error::ZeroMatrix,
            other => other,
        })
    }

    /// Uniform density over `m` rows. Only useful as a contrast in experiments.
    pub fn uniform(m: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; m])
    }

    /// Normalizes nonnegative weights into a density.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        let probs: Vec<f64> = weights
            .iter()
            .map(|w| {
                let p = w / total;
                if p < MIN_PROB {
                    0.0
                } else {
                    p
                }
            })
            .collect();
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        Ok(Self { probs, cumulative })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Inverse-CDF lookup: the first row whose cumulative mass exceeds `u`.
    fn lookup(&self, u: f64) -> usize {
        let k = self.cumulative.partition_point(|&c| c <= u);
        if k < self.probs.len() {
            k
        } else {
            // u landed on the rounded total; take the last row with mass
            self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
        }
    }

    /// Draws `s` rows i.i.d. from this density.
    pub fn draw(&self, s: usize, seed: u64) -> Result<SamplePlan> {
        if s == 0 {
            return Err(Error::InvalidParameter("sample size must be at least 1".into()));
        }
        let total = *self.cumulative.last().ok_or(Error::ZeroMatrix)?;
        let mut rng = rng::seeded(seed);
        let mut indices = Vec::with_capacity(s);
        let mut weights = Vec::with_capacity(s);
        for _ in 0..s {
            let u = rng.random::<f64>() * total;
            let k = self.lookup(u);
            indices.push(k);
            weights.push(1.0 / (s as f64 * self.probs[k]).sqrt());
        }
        Ok(SamplePlan {
            seed,
            sample_size: s,
            indices,
            weights,
        })
    }
}

/// The outcome of one sampling run: the sampling operator `S` in compressed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub seed: u64,
    pub sample_size: usize,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl SamplePlan {
    /// Computes `A_s = S A`. Sparse input gives sparse output.
    pub fn apply<M: MatrixOps>(&self, a: &M) -> Result<M> {
        a.gather_scaled_rows(&self.indices, &self.weights)
    }
}

/// `ceil(factor * n * ln n)`.
pub fn sample_size(n: usize, factor: f64) -> Result<usize> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "sample size needs n >= 2, got {n}"
        )));
    }
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sample factor must be positive, got {factor}"
        )));
    }
    let nf = n as f64;
    Ok((factor * nf * nf.ln()).ceil() as usize)
}

/// The default sample size `ceil(4 n ln n)`.
pub fn default_sample_size(n: usize) -> Result<usize> {
    sample_size(n, 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{DenseMatrix, SparseMatrix};
    use proptest::prelude::*;

    #[test]
    fn default_sample_sizes() {
        assert_eq!(default_sample_size(100).unwrap(), 1843);
        assert_eq!(default_sample_size(709).unwrap(), 18616);
        assert_eq!(default_sample_size(187).unwrap(), 3913);
        assert!(default_sample_size(1).is_err());
    }

    #[test]
    fn density_examples() {
        let d = SamplingDensity::from_row_norms(&DenseMatrix::identity(2)).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.5]);

        let a = DenseMatrix::from_rows(&[vec![3.0, 4.0], vec![0.0, 0.0], vec![0.0, 5.0]]).unwrap();
        let d = SamplingDensity::from_row_norms(&a).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.0, 0.5]);

        assert!(matches!(
            SamplingDensity::from_row_norms(&DenseMatrix::zeros(3, 2)),
            Err(Error::ZeroMatrix)
        ));
    }

    #[test]
    fn density_after_normalization_is_row_norms_over_n() {
        let a = DenseMatrix::from_fn(30, 6, |i, j| ((i * 13 + j * 7) as f64).cos() + 0.1);
        let (an, _) = a.normalize_columns().unwrap();
        let d = SamplingDensity::from_row_norms(&an).unwrap();
        let sq = an.row_squared_norms();
        let total: f64 = d.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (p, r) in d.probs().iter().zip(&sq) {
            assert!((p - r / 6.0).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_density() {
        let d = SamplingDensity::from_weights(&[1.0, 0.0]).unwrap();
        let plan = d.draw(25, 9).unwrap();
        assert!(plan.indices.iter().all(|&i| i == 0));
        assert!(plan.weights.iter().all(|&w| (w - 0.2).abs() < 1e-15));
    }

    #[test]
    fn empirical_frequency() {
        let d = SamplingDensity::from_weights(&[0.5, 0.5]).unwrap();
        let plan = d.draw(100_000, 17).unwrap();
        let zeros = plan.indices.iter().filter(|&&i| i == 0).count() as f64 / 1e5;
        assert!((0.494..=0.506).contains(&zeros), "{zeros}");
    }

    #[test]
    fn draws_are_deterministic() {
        let d = SamplingDensity::from_weights(&[0.1, 0.7, 0.2]).unwrap();
        assert_eq!(d.draw(50, 3).unwrap(), d.draw(50, 3).unwrap());
        assert_ne!(d.draw(50, 3).unwrap(), d.draw(50, 4).unwrap());
    }

    #[test]
    fn plan_json_roundtrip() {
        let d = SamplingDensity::from_weights(&[0.25, 0.75]).unwrap();
        let plan = d.draw(8, 1).unwrap();
        let json = serde_json::to_string(&plan).unwrap();
        assert!(json.contains("\"seed\":1"));
        let back: SamplePlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn apply_full_identity_plan() {
        let n = 5;
        let plan = SamplePlan {
            seed: 0,
            sample_size: n,
            indices: vec![3, 0, 4, 1, 2],
            // p = 1/n, s = n  =>  weight = 1/sqrt(n * 1/n) = 1
            weights: vec![1.0; n],
        };
        let s = plan.apply(&SparseMatrix::identity(n)).unwrap();
        let g = s.transpose_matvec(&s.matvec(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap()).unwrap();
        assert_eq!(g, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(plan.apply(&SparseMatrix::identity(3)).is_err());
    }

    #[test]
    fn single_draw_rank_one() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.0]]).unwrap();
        let d = SamplingDensity::from_row_norms(&a).unwrap();
        let plan = d.draw(1, 5).unwrap();
        let i = plan.indices[0];
        let a_s = plan.apply(&a).unwrap();
        let p = d.probs()[i];
        for j in 0..2 {
            for k in 0..2 {
                let got = a_s.get(0, j) * a_s.get(0, k);
                let want = a.get(i, j) * a.get(i, k) / p;
                assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn coherent_matrix_samples_only_identity_rows() {
        // Z = [I_n; 0]
        let (m, n) = (200, 10);
        let z = SparseMatrix::from_triplets(m, n, &(0..n).map(|i| (i, i, 1.0)).collect::<Vec<_>>())
            .unwrap();
        let d = SamplingDensity::from_row_norms(&z).unwrap();
        let plan = d.draw(default_sample_size(n).unwrap(), 11).unwrap();
        assert!(plan.indices.iter().all(|&i| i < n));
    }

    proptest! {
        #[test]
        fn zero_rows_never_drawn(mask in proptest::collection::vec(any::<bool>(), 2..40), seed in any::<u64>()) {
            prop_assume!(mask.iter().any(|b| *b));
            let w: Vec<f64> = mask.iter().enumerate().map(|(k, b)| if *b { 1.0 + k as f64 } else { 0.0 }).collect();
            let d = SamplingDensity::from_weights(&w).unwrap();
            let total: f64 = d.probs().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            let plan = d.draw(200, seed).unwrap();
            prop_assert_eq!(plan.indices.len(), 200);
            for (&i, &wt) in plan.indices.iter().zip(&plan.weights) {
                prop_assert!(mask[i]);
                prop_assert!(wt.is_finite() && wt > 0.0);
            }
        }
    }
}
