use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;
use crate::rng;

type Column = Vec<(usize, f64)>;

fn givens(rng: &mut rng::Rng) -> (f64, f64) {
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    (theta.cos(), theta.sin())
}

/// Rotates columns `x` and `y`: `x <- c x + s y`, `y <- -s x + c y`.
fn rotate_columns(x: &Column, y: &Column, c: f64, s: f64) -> (Column, Column) {
    let mut nx = Vec::with_capacity(x.len() + y.len());
    let mut ny = Vec::with_capacity(x.len() + y.len());
    let (mut p, mut q) = (0, 0);
    while p < x.len() || q < y.len() {
        let (row, a, b) = match (x.get(p), y.get(q)) {
            (Some(&(i, a)), Some(&(k, _))) if i < k => {
                p += 1;
                (i, a, 0.0)
            }
            (Some(&(i, _)), Some(&(k, b))) if k < i => {
                q += 1;
                (k, 0.0, b)
            }
            (Some(&(i, a)), Some(&(_, b))) => {
                p += 1;
                q += 1;
                (i, a, b)
            }
            (Some(&(i, a)), None) => {
                p += 1;
                (i, a, 0.0)
            }
            (None, Some(&(k, b))) => {
                q += 1;
                (k, 0.0, b)
            }
            (None, None) => unreachable!(),
        };
        let u = c * a + s * b;
        let v = -s * a + c * b;
        if u != 0.0 {
            nx.push((row, u));
        }
        if v != 0.0 {
            ny.push((row, v));
        }
    }
    (nx, ny)
}

fn union_len(x: &Column, y: &Column) -> usize {
    let (mut p, mut q, mut n) = (0, 0, 0);
    while p < x.len() && q < y.len() {
        match x[p].0.cmp(&y[q].0) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                p += 1;
                q += 1;
            }
        }
        n += 1;
    }
    n + (x.len() - p) + (y.len() - q)
}

/// Sparse random `m x n` matrix with about `density * m * n` nonzeros and
/// singular values `cond^{-j/(n-1)}`, `j = 0..n`.
///
/// Starts from a skeleton holding `sigma_j` at `(pi(j), j)` for a random row
/// permutation `pi`, so the singular values are exact. Random Givens
/// rotations then fill it in without changing the spectrum:
///
/// 1. row rotations pairing nonzero rows with zero rows, in rounds, until
///    half the target is reached or no zero row is left;
/// 2. column rotations on random column pairs until the target is reached,
///    skipping any that would overshoot it by more than 10%.
///
/// At most `4 * target` rotations are attempted overall.
pub fn gen_sprand(m: usize, n: usize, density: f64, cond: f64, seed: u64) -> Result<SparseMatrix> {
    if n < 1 || m < n {
        return Err(Error::InvalidParameter(format!("sprand needs m >= n >= 1, got {m}x{n}")));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!("density must be in (0, 1], got {density}")));
    }
    if !(cond >= 1.0 && cond.is_finite()) {
        return Err(Error::InvalidParameter(format!("cond must be >= 1, got {cond}")));
    }
    let mut rng = rng::seeded(seed);
    let target = density * m as f64 * n as f64;
    let max_attempts = (4.0 * target).ceil() as usize;
    let mut attempts = 0;

    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut rng);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for j in 0..n {
        let sigma = if n == 1 { 1.0 } else { cond.powf(-(j as f64) / (n - 1) as f64) };
        rows[perm[j]].push((j, sigma));
    }
    let mut nnz = n;

    // a rotation with a zero row copies the pattern of the nonzero one
    'spread: while (nnz as f64) < target / 2.0 && attempts < max_attempts {
        let mut full: Vec<usize> = (0..m).filter(|&i| !rows[i].is_empty()).collect();
        let mut empty: Vec<usize> = (0..m).filter(|&i| rows[i].is_empty()).collect();
        if empty.is_empty() {
            break;
        }
        full.shuffle(&mut rng);
        empty.shuffle(&mut rng);
        for (&i, &k) in full.iter().zip(&empty) {
            if (nnz as f64) >= target / 2.0 || attempts >= max_attempts {
                break 'spread;
            }
            attempts += 1;
            let (c, s) = givens(&mut rng);
            let src = std::mem::take(&mut rows[i]);
            let mut ri = Vec::with_capacity(src.len());
            let mut rk = Vec::with_capacity(src.len());
            for &(j, v) in &src {
                if c * v != 0.0 {
                    ri.push((j, c * v));
                }
                if -s * v != 0.0 {
                    rk.push((j, -s * v));
                }
            }
            nnz = nnz - src.len() + ri.len() + rk.len();
            rows[i] = ri;
            rows[k] = rk;
        }
    }

    let mut cols: Vec<Column> = vec![Vec::new(); n];
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            cols[j].push((i, v));
        }
    }
    drop(rows);

    if n >= 2 {
        let ceiling = 1.1 * target;
        while (nnz as f64) < target && attempts < max_attempts {
            attempts += 1;
            let i = rng.random_range(0..n);
            let mut k = rng.random_range(0..n - 1);
            if k >= i {
                k += 1;
            }
            let (c, s) = givens(&mut rng);
            let before = cols[i].len() + cols[k].len();
            let after = 2 * union_len(&cols[i], &cols[k]);
            if (nnz - before + after) as f64 > ceiling {
                continue;
            }
            let (x, y) = rotate_columns(&cols[i], &cols[k], c, s);
            nnz = nnz - before + x.len() + y.len();
            cols[i] = x;
            cols[k] = y;
        }
    }

    let trips: Vec<_> = cols
        .iter()
        .enumerate()
        .flat_map(|(j, col)| col.iter().map(move |&(i, v)| (i, j, v)))
        .collect();
    SparseMatrix::from_triplets(m, n, &trips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gram_dense, symmetric_eigenvalues};
    use crate::matrix::MatrixOps;

    fn kappa_normal(a: &SparseMatrix) -> f64 {
        let ev = symmetric_eigenvalues(gram_dense(a)).unwrap();
        ev[ev.len() - 1] / ev[0]
    }

    #[test]
    fn rotation_merge_is_orthogonal() {
        let x = vec![(0, 1.0), (3, 2.0)];
        let y = vec![(1, 1.0), (3, -1.0)];
        let (c, s) = (0.6, 0.8);
        let (nx, ny) = rotate_columns(&x, &y, c, s);
        assert_eq!(nx.iter().map(|e| e.0).collect::<Vec<_>>(), vec![0, 1, 3]);
        let norm = |v: &Column| v.iter().map(|e| e.1 * e.1).sum::<f64>();
        assert!((norm(&nx) + norm(&ny) - norm(&x) - norm(&y)).abs() < 1e-14);
        assert_eq!(union_len(&x, &y), 3);
    }

    #[test]
    fn permutation_like_when_density_is_minimal() {
        let (m, n) = (50, 10);
        let a = gen_sprand(m, n, 1.0 / m as f64, 1.0, 3).unwrap();
        assert_eq!(a.nnz(), n);
        assert!((kappa_normal(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_and_condition() {
        let (m, n, dens, cond) = (2000, 100, 0.02, 30.0);
        let a = gen_sprand(m, n, dens, cond, 11).unwrap();
        let target = dens * (m * n) as f64;
        let nnz = a.nnz() as f64;
        assert!((nnz - target).abs() <= 0.1 * target, "{nnz} vs {target}");
        let kappa = kappa_normal(&a);
        assert!(kappa >= cond * cond / 2.0 && kappa <= cond * cond * 2.0, "{kappa}");
        assert!(a.empty_columns().is_empty());
    }

    #[test]
    fn deterministic() {
        assert_eq!(gen_sprand(300, 20, 0.05, 10.0, 1).unwrap(), gen_sprand(300, 20, 0.05, 10.0, 1).unwrap());
    }

    #[test]
    fn invalid_density() {
        assert!(gen_sprand(10, 5, 1.5, 2.0, 0).is_err());
        assert!(gen_sprand(10, 5, 0.0, 2.0, 0).is_err());
    }
}
