//! Symmetric Gauss-Seidel preconditioner built from the sampled normal matrix.
//!
//! `P r` is computed by starting from `e = 0` and running `t` forward
//! Gauss-Seidel sweeps on `G e = r` followed by `t` backward sweeps, where
//! `G = A_s^T A_s`. Equal forward and backward counts make `P` symmetric.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::matrix::{MatrixOps, SparseMatrix};

/// Diagonal entries at or below this are treated as a missed column.
pub const MIN_GRAM_DIAGONAL: f64 = 1e-14;

/// Default number of forward (and backward) sweeps.
pub const DEFAULT_SWEEPS: usize = 5;

/// An explicitly assembled symmetric Gram matrix `A^T A`.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    storage: SparseMatrix,
    diag: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn storage(&self) -> &SparseMatrix {
        &self.storage
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn nnz(&self) -> usize {
        self.storage.nnz()
    }

    fn from_upper(n: usize, upper: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        // mirror the upper triangle so the stored pattern is exactly symmetric
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (j, entries) in upper.into_iter().enumerate() {
            for (k, v) in entries {
                if v == 0.0 {
                    continue;
                }
                rows[j].push((k, v));
                if k != j {
                    rows[k].push((j, v));
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut idx = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for row in &mut rows {
            row.sort_unstable_by_key(|e| e.0);
            for &(k, v) in row.iter() {
                idx.push(k);
                vals.push(v);
            }
            offsets.push(idx.len());
        }
        let storage = SparseMatrix::from_csr(n, n, offsets, idx, vals)?;
        let mut diag = vec![0.0; n];
        let mut diag_pos = vec![usize::MAX; n];
        for (i, (d, pos)) in diag.iter_mut().zip(diag_pos.iter_mut()).enumerate() {
            let (ri, rv) = storage.row(i);
            if let Ok(k) = ri.binary_search(&i) {
                *d = rv[k];
                *pos = k;
            }
        }
        if let Some(column) = diag.iter().position(|&d| d <= MIN_GRAM_DIAGONAL) {
            return Err(Error::DegenerateGram {
                column,
                value: diag[column],
            });
        }
        Ok(Self {
            storage,
            diag,
            diag_pos,
        })
    }

    /// `y = G x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.storage.matvec_into(x, y);
    }

    /// One forward Gauss-Seidel sweep in place: `e <- e + B^{-1}(r - G e)`,
    /// `B` the lower triangle of `G` including the diagonal.
    pub fn forward_sweep(&self, r: &[f64], e: &mut [f64]) {
        for i in 0..self.n() {
            let (idx, vals) = self.storage.row(i);
            let mut acc = r[i];
            for (k, (&j, &v)) in idx.iter().zip(vals).enumerate() {
                if k != self.diag_pos[i] {
                    acc -= v * e[j];
                }
            }
            e[i] = acc / self.diag[i];
        }
    }

    /// One backward sweep in place: `e <- e + B^{-T}(r - G e)`.
    pub fn backward_sweep(&self, r: &[f64], e: &mut [f64]) {
        for i in (0..self.n()).rev() {
            let (idx, vals) = self.storage.row(i);
            let mut acc = r[i];
            for (k, (&j, &v)) in idx.iter().zip(vals).enumerate() {
                if k != self.diag_pos[i] {
                    acc -= v * e[j];
                }
            }
            e[i] = acc / self.diag[i];
        }
    }
}

/// Assembles `A_s^T A_s` from the rows of `a_s`.
///
/// Each row contributes its outer product. Only the upper triangle is
/// accumulated and then mirrored, so the result is exactly symmetric.
pub fn assemble_gram<M: MatrixOps>(a_s: &M) -> Result<GramMatrix> {
    let n = a_s.ncols();
    if n == 0 {
        return Err(Error::InvalidParameter("gram of a matrix with no columns".into()));
    }
    let dense_rows = a_s.nrows() > 0 && a_s.nnz() * 2 > a_s.nrows() * n;
    if dense_rows {
        assemble_gram_dense(a_s)
    } else {
        assemble_gram_sparse(a_s)
    }
}

/// Dense accumulation path; best when rows are mostly full.
pub fn assemble_gram_dense<M: MatrixOps>(a_s: &M) -> Result<GramMatrix> {
    let n = a_s.ncols();
    let mut acc = vec![0.0; n * n];
    let mut row = Vec::with_capacity(n);
    for t in 0..a_s.nrows() {
        row.clear();
        a_s.for_each_in_row(t, |j, v| {
            if v != 0.0 {
                row.push((j, v));
            }
        });
        for (a, &(j, vj)) in row.iter().enumerate() {
            let dst = &mut acc[j * n..(j + 1) * n];
            for &(k, vk) in &row[a..] {
                dst[k] += vj * vk;
            }
        }
    }
    let upper = (0..n)
        .map(|j| (j..n).map(|k| (k, acc[j * n + k])).collect())
        .collect();
    GramMatrix::from_upper(n, upper)
}

/// Hash-map accumulation path for sparse rows.
pub fn assemble_gram_sparse<M: MatrixOps>(a_s: &M) -> Result<GramMatrix> {
    let n = a_s.ncols();
    let mut acc: Vec<HashMap<usize, f64>> = vec![HashMap::new(); n];
    let mut row = Vec::new();
    for t in 0..a_s.nrows() {
        row.clear();
        a_s.for_each_in_row(t, |j, v| {
            if v != 0.0 {
                row.push((j, v));
            }
        });
        for (a, &(j, vj)) in row.iter().enumerate() {
            for &(k, vk) in &row[a..] {
                *acc[j].entry(k).or_insert(0.0) += vj * vk;
            }
        }
    }
    let upper = acc.into_iter().map(|m| m.into_iter().collect()).collect();
    GramMatrix::from_upper(n, upper)
}

/// A linear map `r -> z` applied once per PCG iteration.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// `z = r`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Debug, Clone)]
pub struct SgsPreconditioner {
    gram: GramMatrix,
    sweeps: usize,
}

impl SgsPreconditioner {
    pub fn new(gram: GramMatrix, sweeps: usize) -> Result<Self> {
        if sweeps == 0 {
            return Err(Error::InvalidParameter("need at least one SGS sweep".into()));
        }
        Ok(Self { gram, sweeps })
    }

    /// Assembles the Gram matrix of `a_s` once and wraps it.
    pub fn build<M: MatrixOps>(a_s: &M, sweeps: usize) -> Result<Self> {
        if sweeps == 0 {
            return Err(Error::InvalidParameter("need at least one SGS sweep".into()));
        }
        Self::new(assemble_gram(a_s)?, sweeps)
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// Returns `P r`.
    pub fn apply_vec(&self, r: &[f64]) -> Result<Vec<f64>> {
        crate::matrix::check_len("sgs_apply", self.gram.n(), r.len())?;
        let mut e = vec![0.0; r.len()];
        Preconditioner::apply(self, r, &mut e);
        Ok(e)
    }
}

impl Preconditioner for SgsPreconditioner {
    fn apply(&self, r: &[f64], e: &mut [f64]) {
        e.fill(0.0);
        for _ in 0..self.sweeps {
            self.gram.forward_sweep(r, e);
        }
        for _ in 0..self.sweeps {
            self.gram.backward_sweep(r, e);
        }
    }
}
