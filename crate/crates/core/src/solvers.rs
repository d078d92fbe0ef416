//! Conjugate gradient on the normal equation `A^T A x = A^T b`.
//!
//! Both solvers are matrix-free: each iteration costs one product with `A`
//! and one with `A^T`. The stopping test is on the normal-equation relative
//! residual `|A^T b - A^T A x| / |A^T b|`. The recurrence residual is
//! tracked every iteration; when it crosses the tolerance the true residual
//! is recomputed, and iteration continues from the true residual if it has
//! not actually converged.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{check_len, dot, norm2, DenseMatrix, MatrixOps};
use crate::precond::{IdentityPreconditioner, Preconditioner, SgsPreconditioner, DEFAULT_SWEEPS};
use crate::rng::derive_seed;
use crate::sampling::{sample_size, SamplingDensity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol: f64,
    /// Iteration cap; `None` means `5 n`.
    pub max_iter: Option<usize>,
    pub sgs_sweeps: usize,
    pub sample_factor: f64,
    pub seed: u64,
    pub retries: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: None,
            sgs_sweeps: DEFAULT_SWEEPS,
            sample_factor: 4.0,
            seed: 0,
            retries: 3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidParameter(format!("tol must be in (0,1), got {}", self.tol)));
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if self.sgs_sweeps == 0 {
            return Err(Error::InvalidParameter("sgs_sweeps must be at least 1".into()));
        }
        if !(self.sample_factor > 0.0 && self.sample_factor.is_finite()) {
            return Err(Error::InvalidParameter("sample_factor must be positive".into()));
        }
        Ok(())
    }

    pub fn max_iter_for(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(5 * n).max(1)
    }
}

/// Iteration statistics of one solve; one row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// Relative residuals, starting with the initial one.
    pub residual_history: Vec<f64>,
    /// True relative residual at exit, recomputed from scratch.
    pub final_relres: f64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    /// Rows drawn for the preconditioner; 0 for plain CG.
    pub sample_size: usize,
    /// Seed of the sample actually used (after any redraws).
    #[serde(default)]
    pub sample_seed: Option<u64>,
    /// Sample redraws caused by a degenerate Gram diagonal.
    #[serde(default)]
    pub redraws: usize,
}

fn true_normal_residual<M: MatrixOps>(a: &M, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut ax = vec![0.0; a.nrows()];
    a.matvec_into(x, &mut ax);
    for (r, bi) in ax.iter_mut().zip(b) {
        *r = bi - *r;
    }
    let mut out = vec![0.0; a.ncols()];
    a.transpose_matvec_into(&ax, &mut out);
    out
}

struct Outcome {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
    final_relres: f64,
}

fn zero_rhs(n: usize) -> Outcome {
    Outcome {
        x: vec![0.0; n],
        iterations: 0,
        converged: true,
        history: vec![0.0],
        final_relres: 0.0,
    }
}

/// Plain CG on the normal equation, `x_0 = 0`.
pub fn cg_normal<M: MatrixOps>(a: &M, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    check_len("cg_normal", a.nrows(), b.len())?;
    let start = Instant::now();
    let out = cg_loop(a, b, cfg.tol, cfg.max_iter_for(a.ncols()))?;
    let report = SolveReport {
        iterations: out.iterations,
        converged: out.converged,
        residual_history: out.history,
        final_relres: out.final_relres,
        setup_seconds: 0.0,
        solve_seconds: start.elapsed().as_secs_f64(),
        sample_size: 0,
        sample_seed: None,
        redraws: 0,
    };
    Ok((out.x, report))
}

fn cg_loop<M: MatrixOps>(a: &M, b: &[f64], tol: f64, max_iter: usize) -> Result<Outcome> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut r = vec![0.0; n];
    a.transpose_matvec_into(b, &mut r);
    let rhs_norm = norm2(&r);
    if rhs_norm == 0.0 {
        return Ok(zero_rhs(n));
    }
    let mut x = vec![0.0; n];
    let mut p = r.clone();
    let mut w = vec![0.0; m];
    let mut q = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut history = vec![1.0];

    for it in 1..=max_iter {
        a.matvec_into(&p, &mut w);
        a.transpose_matvec_into(&w, &mut q);
        let curvature = dot(&p, &q);
        if curvature <= 0.0 || !curvature.is_finite() {
            return Err(Error::Breakdown { iteration: it, curvature });
        }
        let alpha = rr / curvature;
        for ((xi, ri), (pi, qi)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&q)) {
            *xi += alpha * pi;
            *ri -= alpha * qi;
        }
        let mut rel = norm2(&r) / rhs_norm;
        if rel <= tol {
            r = true_normal_residual(a, b, &x);
            rel = norm2(&r) / rhs_norm;
            if rel <= tol {
                history.push(rel);
                return Ok(Outcome {
                    x,
                    iterations: it,
                    converged: true,
                    history,
                    final_relres: rel,
                });
            }
        }
        history.push(rel);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    let final_relres = norm2(&true_normal_residual(a, b, &x)) / rhs_norm;
    Ok(Outcome {
        x,
        iterations: max_iter,
        converged: false,
        history,
        final_relres,
    })
}

/// Preconditioned CG on the normal equation, `x_0 = 0`.
///
/// `precond` must be symmetric positive (semi)definite on the range of `A^T`.
pub fn pcg_normal<M: MatrixOps, P: Preconditioner>(
    a: &M,
    b: &[f64],
    precond: &P,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    check_len("pcg_normal", a.nrows(), b.len())?;
    let start = Instant::now();
    let out = pcg_loop(a, b, precond, cfg.tol, cfg.max_iter_for(a.ncols()))?;
    let report = SolveReport {
        iterations: out.iterations,
        converged: out.converged,
        residual_history: out.history,
        final_relres: out.final_relres,
        setup_seconds: 0.0,
        solve_seconds: start.elapsed().as_secs_f64(),
        sample_size: 0,
        sample_seed: None,
        redraws: 0,
    };
    Ok((out.x, report))
}

fn pcg_loop<M: MatrixOps, P: Preconditioner>(
    a: &M,
    b: &[f64],
    precond: &P,
    tol: f64,
    max_iter: usize,
) -> Result<Outcome> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut r = vec![0.0; n];
    a.transpose_matvec_into(b, &mut r);
    let rhs_norm = norm2(&r);
    if rhs_norm == 0.0 {
        return Ok(zero_rhs(n));
    }
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut w = vec![0.0; m];
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = vec![1.0];

    for it in 1..=max_iter {
        a.matvec_into(&p, &mut w);
        a.transpose_matvec_into(&w, &mut q);
        let curvature = dot(&p, &q);
        if curvature <= 0.0 || !curvature.is_finite() {
            return Err(Error::Breakdown { iteration: it, curvature });
        }
        let alpha = rz / curvature;
        for ((xi, ri), (pi, qi)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&q)) {
            *xi += alpha * pi;
            *ri -= alpha * qi;
        }
        let mut rel = norm2(&r) / rhs_norm;
        if rel <= tol {
            r = true_normal_residual(a, b, &x);
            rel = norm2(&r) / rhs_norm;
            if rel <= tol {
                history.push(rel);
                return Ok(Outcome {
                    x,
                    iterations: it,
                    converged: true,
                    history,
                    final_relres: rel,
                });
            }
        }
        history.push(rel);
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        rz = rz_new;
    }
    let final_relres = norm2(&true_normal_residual(a, b, &x)) / rhs_norm;
    Ok(Outcome {
        x,
        iterations: max_iter,
        converged: false,
        history,
        final_relres,
    })
}

/// The seed used for the `attempt`-th redraw of a degenerate sample.
pub fn redraw_seed(seed: u64, attempt: usize) -> u64 {
    if attempt == 0 {
        seed
    } else {
        derive_seed(seed, attempt as u64)
    }
}

/// Builds the row-sampling SGS preconditioner for an already column-normalized
/// matrix, redrawing the sample when its Gram matrix misses a column.
///
/// Returns the preconditioner, the seed of the accepted sample and the number
/// of redraws.
pub fn build_rs_preconditioner<M: MatrixOps>(
    normalized: &M,
    cfg: &SolverConfig,
) -> Result<(SgsPreconditioner, usize, u64, usize)> {
    let n = normalized.ncols();
    let s = sample_size(n.max(2), cfg.sample_factor)?;
    let density = SamplingDensity::from_row_norms(normalized)?;
    let mut attempt = 0;
    loop {
        let seed = redraw_seed(cfg.seed, attempt);
        let plan = density.draw(s, seed)?;
        let a_s = plan.apply(normalized)?;
        match SgsPreconditioner::build(&a_s, cfg.sgs_sweeps) {
            Ok(p) => return Ok((p, s, seed, attempt)),
            Err(Error::DegenerateGram { .. }) if attempt < cfg.retries => attempt += 1,
            Err(e) => return Err(e),
        }
    }
}

/// Solves `min |A x - b|` with the row-sampling preconditioned PCG.
///
/// 1. scale columns to unit norm, `A~ = A D^{-1}`;
/// 2. draw `ceil(sample_factor * n ln n)` rows of `A~` by squared row norm;
/// 3. build the SGS preconditioner from the sampled Gram matrix;
/// 4. run PCG on `A~^T A~ y = A~^T b` and return `x = D^{-1} y`.
///
/// Residuals in the report refer to the normalized system.
pub fn lsq_solve_rs<M: MatrixOps>(a: &M, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    check_len("lsq_solve_rs", a.nrows(), b.len())?;
    let setup = Instant::now();
    let (normalized, scale) = a.normalize_columns()?;
    let (precond, s, seed, redraws) = build_rs_preconditioner(&normalized, cfg)?;
    let setup_seconds = setup.elapsed().as_secs_f64();

    let solve = Instant::now();
    let out = pcg_loop(&normalized, b, &precond, cfg.tol, cfg.max_iter_for(a.ncols()))?;
    let solve_seconds = solve.elapsed().as_secs_f64();

    let x = out.x.iter().zip(&scale).map(|(y, d)| y / d).collect();
    Ok((
        x,
        SolveReport {
            iterations: out.iterations,
            converged: out.converged,
            residual_history: out.history,
            final_relres: out.final_relres,
            setup_seconds,
            solve_seconds,
            sample_size: s,
            sample_seed: Some(seed),
            redraws,
        },
    ))
}

/// CG on the column-normalized system, the baseline the row-sampling solver
/// is compared against. Setup time covers the normalization.
pub fn lsq_solve_cg<M: MatrixOps>(a: &M, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    check_len("lsq_solve_cg", a.nrows(), b.len())?;
    let setup = Instant::now();
    let (normalized, scale) = a.normalize_columns()?;
    let setup_seconds = setup.elapsed().as_secs_f64();
    let (y, mut report) = cg_normal(&normalized, b, cfg)?;
    report.setup_seconds = setup_seconds;
    Ok((y.iter().zip(&scale).map(|(v, d)| v / d).collect(), report))
}

/// PCG with the identity preconditioner; exposed for cross-checks against [`cg_normal`].
pub fn pcg_identity<M: MatrixOps>(a: &M, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    pcg_normal(a, b, &IdentityPreconditioner, cfg)
}

/// Dense reference solution of the normal equation by Cholesky.
///
/// Intended as a test oracle for `n` up to a few thousand.
pub fn dense_lsq_oracle(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_len("dense_lsq_oracle", a.nrows(), b.len())?;
    let g = linalg::to_rows(&linalg::gram_dense(a));
    let atb = a.transpose_matvec(b)?;
    linalg::cholesky_solve(&g, &atb)
}
