//! Spectral quantities and Monte Carlo checks of the sampling estimator.
//!
//! Everything here forms `A^T A` densely, so it is meant for `n` up to a
//! few thousand (a few hundred for the repeated-trial tests).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, gram_dense};
use crate::matrix::MatrixOps;
use crate::rng::derive_seed;
use crate::sampling::SamplingDensity;

/// Largest `n` handled by the dense eigensolve in [`spectral_summary`].
pub const DENSE_SPECTRUM_LIMIT: usize = 2000;

/// Default high-frequency constant.
pub const DEFAULT_C_H: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub m: usize,
    pub n: usize,
    pub lambda_max: f64,
    /// Smallest eigenvalue of `A^T A` above `rank_tolerance`.
    pub lambda_min_nonzero: f64,
    pub rank_tolerance: f64,
    pub rank: usize,
    /// `lambda_max / lambda_min_nonzero`; the effective condition number when rank deficient.
    pub kappa_normal: f64,
    /// `max_i |u_i|^2` over an orthonormal basis of the column space; `None` when rank deficient.
    pub coherence: Option<f64>,
    /// Set when the eigenvalues come from power iteration.
    pub approximate: bool,
}

fn rank_tolerance(n: usize, lambda_max: f64) -> f64 {
    n as f64 * lambda_max * 1e-12
}

/// Eigenvalue range, rank and coherence of `A`.
pub fn spectral_summary<M: MatrixOps>(a: &M) -> Result<SpectralSummary> {
    let (m, n) = (a.nrows(), a.ncols());
    if n == 0 {
        return Err(Error::InvalidParameter("spectral summary of an empty matrix".into()));
    }
    if n > DENSE_SPECTRUM_LIMIT {
        return approximate_summary(a);
    }
    let g = gram_dense(a);
    let ev = linalg::symmetric_eigenvalues(g.clone())?;
    let lambda_max = ev[n - 1];
    if lambda_max <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let tol = rank_tolerance(n, lambda_max);
    let nonzero: Vec<f64> = ev.iter().copied().filter(|&l| l > tol).collect();
    let lambda_min_nonzero = nonzero[0];
    let rank = nonzero.len();
    let coherence = if rank == n { coherence_from_gram(a, &g).ok() } else { None };
    Ok(SpectralSummary {
        m,
        n,
        lambda_max,
        lambda_min_nonzero,
        rank_tolerance: tol,
        rank,
        kappa_normal: lambda_max / lambda_min_nonzero,
        coherence,
        approximate: false,
    })
}

/// Coherence `max_i |L^{-1} a_i|^2` with `A^T A = L L^T`.
pub fn coherence<M: MatrixOps>(a: &M) -> Result<f64> {
    coherence_from_gram(a, &gram_dense(a))
}

fn coherence_from_gram<M: MatrixOps>(a: &M, g: &DMatrix<f64>) -> Result<f64> {
    let l = linalg::cholesky(&linalg::to_rows(g))?;
    let n = a.ncols();
    let mut row = vec![0.0; n];
    let mut best = 0.0f64;
    for i in 0..a.nrows() {
        row.fill(0.0);
        a.for_each_in_row(i, |j, v| row[j] = v);
        let u = linalg::forward_substitute(&l, &row);
        best = best.max(u.iter().map(|x| x * x).sum());
    }
    Ok(best)
}

fn approximate_summary<M: MatrixOps>(a: &M) -> Result<SpectralSummary> {
    let (m, n) = (a.nrows(), a.ncols());
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut w = vec![0.0; m];
        a.matvec_into(x, &mut w);
        let mut y = vec![0.0; n];
        a.transpose_matvec_into(&w, &mut y);
        y
    };
    let lambda_max = power_iteration(n, 300, |x| apply(x));
    if lambda_max <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    // largest eigenvalue of lambda_max I - A^T A
    let shifted = power_iteration(n, 1000, |x| {
        let y = apply(x);
        x.iter().zip(&y).map(|(xi, yi)| lambda_max * xi - yi).collect()
    });
    let tol = rank_tolerance(n, lambda_max);
    let lambda_min = (lambda_max - shifted).max(tol);
    Ok(SpectralSummary {
        m,
        n,
        lambda_max,
        lambda_min_nonzero: lambda_min,
        rank_tolerance: tol,
        rank: n,
        kappa_normal: lambda_max / lambda_min,
        coherence: None,
        approximate: true,
    })
}

fn power_iteration(n: usize, iters: usize, op: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618).fract()).collect();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nrm);
        let y = op(&x);
        lambda = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        x = y;
    }
    lambda
}

fn check_normalized<M: MatrixOps>(a: &M) -> Result<()> {
    let fro2: f64 = a.row_squared_norms().iter().sum();
    let n = a.ncols() as f64;
    if (fro2 - n).abs() > 1e-8 * n {
        return Err(Error::InvalidParameter(format!(
            "expected unit-norm columns (|A|_F^2 = {n}), got {fro2}"
        )));
    }
    Ok(())
}

fn sampled_gram<M: MatrixOps>(a: &M, density: &SamplingDensity, s: usize, seed: u64) -> Result<DMatrix<f64>> {
    let plan = density.draw(s, seed)?;
    Ok(gram_dense(&plan.apply(a)?))
}

/// Seed of trial `t` in the repeated-sample tests.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    derive_seed(seed, t as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub trials: usize,
    pub epsilon: f64,
    pub sample_size: usize,
    /// Trials with `|A_s^T A_s - A^T A| <= epsilon`.
    pub successes: usize,
    /// Observed deviation norm per trial.
    pub norms: Vec<f64>,
    /// Successful trials whose extreme eigenvalues fall outside
    /// `[lambda_min - epsilon, lambda_max + epsilon]`.
    pub sandwich_violations: usize,
}

impl ConcentrationReport {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Draws `trials` independent samples of size `s` from a column-normalized
/// `A` and measures the spectral norm of `A_s^T A_s - A^T A`.
pub fn concentration_test<M: MatrixOps>(
    a: &M,
    s: usize,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    check_normalized(a)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let g = gram_dense(a);
    let ev = linalg::symmetric_eigenvalues(g.clone())?;
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    let slack = 1e-12 * hi;
    let density = SamplingDensity::from_row_norms(a)?;
    let mut norms = Vec::with_capacity(trials);
    let mut successes = 0;
    let mut sandwich_violations = 0;
    for t in 0..trials {
        let gs = sampled_gram(a, &density, s, trial_seed(seed, t))?;
        let dev = linalg::symmetric_spectral_norm(&gs - &g)?;
        norms.push(dev);
        if dev <= epsilon {
            successes += 1;
            let evs = linalg::symmetric_eigenvalues(gs)?;
            if evs[0] < lo - epsilon - slack || evs[evs.len() - 1] > hi + epsilon + slack {
                sandwich_violations += 1;
            }
        }
    }
    Ok(ConcentrationReport {
        trials,
        epsilon,
        sample_size: s,
        successes,
        norms,
        sandwich_violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighFrequencyReport {
    pub c_h: f64,
    pub trials: usize,
    pub sample_size: usize,
    /// Eigenvectors with `lambda >= lambda_max / c_h`.
    pub high_frequency_vectors: usize,
    /// `(vector, trial)` pairs outside `(1 +- c_h eps) (A^T A x, x)`, `eps` the trial's deviation.
    pub violations: usize,
    /// Mean `|(A_s^T A_s x, x) / (A^T A x, x) - 1|` for the top eigenvector.
    pub top_ratio_deviation: f64,
    /// The same for the bottom eigenvector.
    pub bottom_ratio_deviation: f64,
}

/// Checks the quadratic-form bound on high-frequency eigenvectors of `A^T A`.
pub fn high_frequency_test<M: MatrixOps>(
    a: &M,
    s: usize,
    c_h: f64,
    trials: usize,
    seed: u64,
) -> Result<HighFrequencyReport> {
    check_normalized(a)?;
    if !(c_h >= 1.0) {
        return Err(Error::InvalidParameter(format!("c_h must be >= 1, got {c_h}")));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let n = a.ncols();
    let g = gram_dense(a);
    let (vals, vecs) = linalg::symmetric_eigen(g.clone())?;
    let lambda_max = vals[n - 1];
    let high: Vec<usize> = (0..n).filter(|&k| vals[k] >= lambda_max / c_h).collect();
    let density = SamplingDensity::from_row_norms(a)?;
    let quad = |m: &DMatrix<f64>, k: usize| -> f64 {
        let x: DVector<f64> = vecs.column(k).into_owned();
        x.dot(&(m * &x))
    };
    let mut violations = 0;
    let (mut top, mut bottom) = (0.0, 0.0);
    for t in 0..trials {
        let gs = sampled_gram(a, &density, s, trial_seed(seed, t))?;
        let eps = linalg::symmetric_spectral_norm(&gs - &g)?;
        for &k in &high {
            let q = vals[k];
            let qs = quad(&gs, k);
            let slack = 1e-12 * lambda_max;
            if qs < (1.0 - c_h * eps) * q - slack || qs > (1.0 + c_h * eps) * q + slack {
                violations += 1;
            }
        }
        top += (quad(&gs, n - 1) / vals[n - 1] - 1.0).abs();
        bottom += (quad(&gs, 0) / vals[0] - 1.0).abs();
    }
    Ok(HighFrequencyReport {
        c_h,
        trials,
        sample_size: s,
        high_frequency_vectors: high.len(),
        violations,
        top_ratio_deviation: top / trials as f64,
        bottom_ratio_deviation: bottom / trials as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnbiasednessReport {
    pub draws: usize,
    /// Largest `|mean - G_ij| / standard_error` over all entries.
    pub max_z: f64,
    /// Entries farther than three standard errors from `A^T A`.
    pub outside_3se: usize,
}

/// Averages `draws` single-row estimates `a_i a_i^T / p_i` and compares
/// each entry with `A^T A` in units of its standard error.
pub fn unbiasedness_test<M: MatrixOps>(a: &M, draws: usize, seed: u64) -> Result<UnbiasednessReport> {
    if draws < 2 {
        return Err(Error::InvalidParameter("need at least two draws".into()));
    }
    let n = a.ncols();
    let g = gram_dense(a);
    let density = SamplingDensity::from_row_norms(a)?;
    let plan = density.draw(draws, seed)?;
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut sum_sq = DMatrix::<f64>::zeros(n, n);
    let mut row = vec![0.0; n];
    for &i in &plan.indices {
        row.fill(0.0);
        a.for_each_in_row(i, |j, v| row[j] = v);
        let p = density.probs()[i];
        for j in 0..n {
            for k in 0..n {
                let x = row[j] * row[k] / p;
                sum[(j, k)] += x;
                sum_sq[(j, k)] += x * x;
            }
        }
    }
    let d = draws as f64;
    let scale = g.amax().max(f64::MIN_POSITIVE);
    let mut max_z = 0.0f64;
    let mut outside = 0;
    for j in 0..n {
        for k in 0..n {
            let mean = sum[(j, k)] / d;
            let var = ((sum_sq[(j, k)] - d * mean * mean) / (d - 1.0)).max(0.0);
            let se = (var / d).sqrt();
            let diff = (mean - g[(j, k)]).abs();
            let z = if se > 1e-12 * scale {
                diff / se
            } else if diff <= 1e-10 * scale {
                0.0
            } else {
                f64::INFINITY
            };
            max_z = max_z.max(z);
            if z > 3.0 {
                outside += 1;
            }
        }
    }
    Ok(UnbiasednessReport {
        draws,
        max_z,
        outside_3se: outside,
    })
}

/// `(i, j, value)` for `i < j` and `|value| >= theta`.
pub fn filtered_edges(g: &DMatrix<f64>, theta: f64) -> Vec<(usize, usize, f64)> {
    let n = g.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let v = g[(i, j)];
            if v.abs() >= theta {
                out.push((i, j, v));
            }
        }
    }
    out
}

/// Jaccard similarity of two edge sets; two empty sets count as identical.
pub fn jaccard(a: &[(usize, usize, f64)], b: &[(usize, usize, f64)]) -> f64 {
    use std::collections::HashSet;
    let sa: HashSet<(usize, usize)> = a.iter().map(|e| (e.0, e.1)).collect();
    let sb: HashSet<(usize, usize)> = b.iter().map(|e| (e.0, e.1)).collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        1.0
    } else {
        sa.intersection(&sb).count() as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredGramReport {
    pub theta: f64,
    pub full_edges: usize,
    pub sampled_edges: usize,
    pub jaccard: f64,
    pub full_path: PathBuf,
    pub sampled_path: PathBuf,
}

fn write_edges(path: &Path, edges: &[(usize, usize, f64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &(i, j, v) in edges {
        writeln!(w, "{i}\t{j}\t{v:e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the thresholded off-diagonal entries of `A^T A` and `A_s^T A_s` as
/// TSV edge lists `<prefix>_full.tsv` and `<prefix>_sampled.tsv` in `dir`.
pub fn filtered_gram_export<M: MatrixOps>(
    a: &M,
    a_s: &M,
    theta: f64,
    dir: impl AsRef<Path>,
    prefix: &str,
) -> Result<FilteredGramReport> {
    if a.ncols() != a_s.ncols() {
        return Err(Error::DimensionMismatch {
            op: "filtered_gram_export",
            expected: a.ncols(),
            found: a_s.ncols(),
        });
    }
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter(format!("theta must be >= 0, got {theta}")));
    }
    let full = filtered_edges(&gram_dense(a), theta);
    let sampled = filtered_edges(&gram_dense(a_s), theta);
    let dir = dir.as_ref();
    let full_path = dir.join(format!("{prefix}_full.tsv"));
    let sampled_path = dir.join(format!("{prefix}_sampled.tsv"));
    write_edges(&full_path, &full)?;
    write_edges(&sampled_path, &sampled)?;
    Ok(FilteredGramReport {
        theta,
        full_edges: full.len(),
        sampled_edges: sampled.len(),
        jaccard: jaccard(&full, &sampled),
        full_path,
        sampled_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{coherent_matrix, gen_gaussian, gen_udv};
    use crate::matrix::{DenseMatrix, SparseMatrix};
    use crate::sampling::default_sample_size;

    #[test]
    fn identity_summary() {
        let s = spectral_summary(&SparseMatrix::identity(6)).unwrap();
        assert_eq!(s.kappa_normal, 1.0);
        assert_eq!(s.rank, 6);
        assert!((s.coherence.unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn coherent_matrix_summary() {
        let s = spectral_summary(&coherent_matrix(100, 10).unwrap()).unwrap();
        assert!((s.coherence.unwrap() - 1.0).abs() < 1e-14);
        assert!((s.kappa_normal - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kappa_matches_singular_values() {
        let a = gen_udv(120, 12, 7.0, 3).unwrap();
        let s = spectral_summary(&a).unwrap();
        assert!((s.kappa_normal / 49.0 - 1.0).abs() < 1e-6, "{}", s.kappa_normal);
        let na = nalgebra::DMatrix::from_row_slice(120, 12, a.data());
        let sv = na.singular_values();
        let k2 = (sv.max() / sv.min()).powi(2);
        assert!((s.kappa_normal / k2 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn coherence_bounds_and_scale_invariance() {
        let a = gen_gaussian(300, 15, 2).unwrap();
        let mu = coherence(&a).unwrap();
        assert!((15.0 / 300.0 - 1e-12..=1.0).contains(&mu));
        let scaled = a.scale_columns(&(1..=15).map(|j| j as f64 * 3.0).collect::<Vec<_>>());
        assert!((coherence(&scaled).unwrap() - mu).abs() < 1e-10);
    }

    #[test]
    fn rank_deficient_has_no_coherence() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        let s = spectral_summary(&a).unwrap();
        assert_eq!(s.rank, 1);
        assert!(s.coherence.is_none());
        assert_eq!(s.kappa_normal, 1.0);
    }

    #[test]
    fn effective_condition_of_path_laplacian() {
        // path on 4 vertices: Laplacian eigenvalues 2 - 2 cos(k pi / 4)
        let b = SparseMatrix::from_triplets(
            3,
            4,
            &[(0, 0, 1.0), (0, 1, -1.0), (1, 1, 1.0), (1, 2, -1.0), (2, 2, 1.0), (2, 3, -1.0)],
        )
        .unwrap();
        let s = spectral_summary(&b).unwrap();
        assert_eq!(s.rank, 3);
        let l = |k: f64| 2.0 - 2.0 * (k * std::f64::consts::PI / 4.0).cos();
        assert!((s.kappa_normal - l(3.0) / l(1.0)).abs() < 1e-10);
        assert!(s.lambda_min_nonzero > s.rank_tolerance);
    }

    #[test]
    fn power_iteration_agrees_roughly() {
        let a = gen_udv(200, 10, 3.0, 1).unwrap();
        let exact = spectral_summary(&a).unwrap();
        let approx = approximate_summary(&a).unwrap();
        assert!(approx.approximate);
        assert!((approx.lambda_max / exact.lambda_max - 1.0).abs() < 1e-6);
        assert!((approx.kappa_normal / exact.kappa_normal - 1.0).abs() < 1e-2);
    }

    #[test]
    fn huge_sample_concentrates() {
        let (a, _) = gen_gaussian(50, 5, 1).unwrap().normalize_columns().unwrap();
        let r = concentration_test(&a, 1_000_000, 0.05, 3, 7).unwrap();
        assert_eq!(r.successes, 3);
        assert_eq!(r.sandwich_violations, 0);
        assert!(r.norms.iter().all(|&x| x < 0.05));
    }

    #[test]
    fn concentration_requires_normalized_input() {
        let a = gen_gaussian(50, 5, 1).unwrap();
        assert!(concentration_test(&a, 100, 0.5, 2, 0).is_err());
    }

    #[test]
    fn success_rate_grows_with_sample_size() {
        let (a, _) = gen_gaussian(500, 10, 4).unwrap().normalize_columns().unwrap();
        let n = 10.0f64;
        let sizes = [10, (2.0 * n * n.ln()).ceil() as usize, default_sample_size(10).unwrap()];
        let rates: Vec<f64> = sizes
            .iter()
            .map(|&s| concentration_test(&a, s, 0.5, 100, 1).unwrap().success_rate())
            .collect();
        let inversions = rates.windows(2).filter(|w| w[1] < w[0]).count();
        assert!(inversions <= 1, "{rates:?}");
    }

    #[test]
    fn high_frequency_bound_holds_with_measured_eps() {
        let (a, _) = gen_gaussian(2000, 50, 5).unwrap().normalize_columns().unwrap();
        let s = default_sample_size(50).unwrap();
        let r = high_frequency_test(&a, s, DEFAULT_C_H, 20, 3).unwrap();
        assert!(r.high_frequency_vectors >= 1);
        assert_eq!(r.violations, 0);
        assert!(r.bottom_ratio_deviation > r.top_ratio_deviation);
    }

    #[test]
    fn top_ratio_tends_to_one() {
        let (a, _) = gen_gaussian(100, 5, 5).unwrap().normalize_columns().unwrap();
        let r = high_frequency_test(&a, 500_000, DEFAULT_C_H, 2, 3).unwrap();
        assert!(r.top_ratio_deviation < 0.01);
    }

    #[test]
    fn unbiased_on_small_matrix() {
        let a = DenseMatrix::from_fn(20, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 - 4.5);
        let r = unbiasedness_test(&a, 10_000, 12).unwrap();
        assert!(r.max_z < 5.0, "{}", r.max_z);
    }

    #[test]
    fn edge_filtering() {
        let g = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.0, -0.5, 0.0, -0.5, 1.0]);
        assert_eq!(filtered_edges(&g, 0.0).len(), 3);
        assert_eq!(filtered_edges(&g, 0.3), vec![(1, 2, -0.5)]);
        assert!(filtered_edges(&g, 0.6).is_empty());
        assert_eq!(jaccard(&[], &[]), 1.0);
        assert_eq!(jaccard(&filtered_edges(&g, 0.0), &filtered_edges(&g, 0.3)), 1.0 / 3.0);
    }

    #[test]
    fn export_writes_tsv() {
        let dir = tempfile::tempdir().unwrap();
        let (a, _) = gen_gaussian(400, 8, 1).unwrap().normalize_columns().unwrap();
        let plan = SamplingDensity::from_row_norms(&a).unwrap().draw(200, 1).unwrap();
        let a_s = plan.apply(&a).unwrap();
        let r = filtered_gram_export(&a, &a_s, 0.0, dir.path(), "g").unwrap();
        assert_eq!(r.full_edges, 28);
        let text = std::fs::read_to_string(&r.full_path).unwrap();
        let first = text.lines().next().unwrap();
        let cols: Vec<&str> = first.split('\t').collect();
        assert_eq!(&cols[..2], &["0", "1"]);
        assert!(cols[2].parse::<f64>().is_ok());
        let r = filtered_gram_export(&a, &a_s, 1e9, dir.path(), "h").unwrap();
        assert_eq!((r.full_edges, r.sampled_edges, r.jaccard), (0, 0, 1.0));
    }
}
