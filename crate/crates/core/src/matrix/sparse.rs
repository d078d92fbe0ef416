use super::{DenseMatrix, MatrixOps};
use crate::error::{Error, Result};

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row and no explicit
/// zeros are stored, so `nnz()` counts structural nonzeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from raw CSR arrays, dropping explicit zeros and validating the result.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let raw = Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        };
        raw.validate_layout()?;
        let out = raw.drop_zeros();
        out.validate()?;
        Ok(out)
    }

    pub(crate) fn from_csr_unchecked(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        let m = Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        };
        debug_assert!(m.validate().is_ok(), "{:?}", m.validate());
        m
    }

    /// Builds from `(row, col, value)` triplets. Duplicate coordinates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; rows + 1];
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::InvalidStructure(format!(
                    "entry ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            counts[i + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(i, j, v) in triplets {
            entries[next[i]] = (j, v);
            next[i] += 1;
        }
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut idx = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        offsets.push(0);
        for i in 0..rows {
            let row = &mut entries[counts[i]..counts[i + 1]];
            row.sort_by_key(|e| e.0);
            let start = idx.len();
            for &(j, v) in row.iter() {
                if idx.len() > start && *idx.last().unwrap() == j {
                    *vals.last_mut().unwrap() += v;
                } else {
                    idx.push(j);
                    vals.push(v);
                }
            }
            offsets.push(idx.len());
        }
        Ok(Self {
            rows,
            cols,
            row_offsets: offsets,
            col_indices: idx,
            values: vals,
        }
        .drop_zeros())
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    fn validate_layout(&self) -> Result<()> {
        if self.row_offsets.len() != self.rows + 1 {
            return Err(Error::InvalidStructure(format!(
                "row_offsets has length {}, expected {}",
                self.row_offsets.len(),
                self.rows + 1
            )));
        }
        if self.col_indices.len() != self.values.len() {
            return Err(Error::InvalidStructure(
                "col_indices and values differ in length".into(),
            ));
        }
        if self.row_offsets[0] != 0 || self.row_offsets[self.rows] != self.col_indices.len() {
            return Err(Error::InvalidStructure(
                "row_offsets must start at 0 and end at nnz".into(),
            ));
        }
        if self.row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidStructure("row_offsets decreasing".into()));
        }
        Ok(())
    }

    /// Checks every CSR structural invariant.
    pub fn validate(&self) -> Result<()> {
        self.validate_layout()?;
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            for (k, (&j, &v)) in idx.iter().zip(vals).enumerate() {
                if j >= self.cols {
                    return Err(Error::InvalidStructure(format!(
                        "row {i}: column {j} out of range"
                    )));
                }
                if k > 0 && idx[k - 1] >= j {
                    return Err(Error::InvalidStructure(format!(
                        "row {i}: columns not strictly increasing"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if v == 0.0 {
                    return Err(Error::InvalidStructure(format!(
                        "row {i}: explicit zero at column {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn drop_zeros(self) -> Self {
        if !self.values.contains(&0.0) {
            return self;
        }
        let mut offsets = Vec::with_capacity(self.rows + 1);
        let mut idx = Vec::with_capacity(self.col_indices.len());
        let mut vals = Vec::with_capacity(self.values.len());
        offsets.push(0);
        for i in 0..self.rows {
            let (ri, rv) = self.row(i);
            for (&j, &v) in ri.iter().zip(rv) {
                if v != 0.0 {
                    idx.push(j);
                    vals.push(v);
                }
            }
            offsets.push(idx.len());
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            row_offsets: offsets,
            col_indices: idx,
            values: vals,
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, vals) = self.row(i);
        idx.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (idx, vals) = self.row(i);
            idx.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut idx = vec![0usize; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for (i, j, v) in self.triplets() {
            idx[next[j]] = i;
            vals[next[j]] = v;
            next[j] += 1;
        }
        SparseMatrix::from_csr_unchecked(self.cols, self.rows, counts, idx, vals)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            d.set(i, j, v);
        }
        d
    }

    /// Indices of columns with no stored entries.
    pub fn empty_columns(&self) -> Vec<usize> {
        let mut seen = vec![false; self.cols];
        for &j in &self.col_indices {
            seen[j] = true;
        }
        seen.iter()
            .enumerate()
            .filter_map(|(j, s)| (!s).then_some(j))
            .collect()
    }

    /// Keeps only the listed columns, renumbered in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Result<SparseMatrix> {
        let mut map = vec![usize::MAX; self.cols];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.cols {
                return Err(Error::InvalidParameter(format!("column {old} out of range")));
            }
            map[old] = new;
        }
        let trips: Vec<_> = self
            .triplets()
            .filter(|&(_, j, _)| map[j] != usize::MAX)
            .map(|(i, j, v)| (i, map[j], v))
            .collect();
        SparseMatrix::from_triplets(self.rows, keep.len(), &trips)
    }
}

impl MatrixOps for SparseMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn nnz(&self) -> usize {
        self.values.len()
    }

    fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (idx, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in idx.iter().zip(vals) {
                acc += v * x[j];
            }
            *yi = acc;
        }
    }

    fn transpose_matvec_into(&self, y: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            let (idx, vals) = self.row(i);
            for (&j, &v) in idx.iter().zip(vals) {
                x[j] += v * yi;
            }
        }
    }

    fn for_each_in_row<F: FnMut(usize, f64)>(&self, i: usize, mut f: F) {
        let (idx, vals) = self.row(i);
        for (&j, &v) in idx.iter().zip(vals) {
            f(j, v);
        }
    }

    fn scale_columns(&self, scale: &[f64]) -> Self {
        let mut out = self.clone();
        for (v, &j) in out.values.iter_mut().zip(&self.col_indices) {
            *v *= scale[j];
        }
        out.drop_zeros()
    }

    fn gather_scaled_rows(&self, indices: &[usize], weights: &[f64]) -> Result<Self> {
        super::check_len("gather_scaled_rows", indices.len(), weights.len())?;
        let mut offsets = Vec::with_capacity(indices.len() + 1);
        let mut idx = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for (&i, &w) in indices.iter().zip(weights) {
            if i >= self.rows {
                return Err(Error::InvalidParameter(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            let (ri, rv) = self.row(i);
            idx.extend_from_slice(ri);
            vals.extend(rv.iter().map(|v| v * w));
            offsets.push(idx.len());
        }
        Ok(Self {
            rows: indices.len(),
            cols: self.cols,
            row_offsets: offsets,
            col_indices: idx,
            values: vals,
        }
        .drop_zeros())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_example() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 1, 5.0), (1, 2, 2.0)]).unwrap();
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]).unwrap(), vec![5.0, 2.0]);
        assert_eq!(a.transpose_matvec(&[1.0, 1.0]).unwrap(), vec![0.0, 5.0, 2.0]);
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let a = SparseMatrix::from_triplets(
            2,
            2,
            &[(0, 1, 1.0), (0, 0, 2.0), (0, 1, 1.5), (1, 1, 3.0), (1, 1, -3.0)],
        )
        .unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), 2.5);
        assert_eq!(a.get(1, 1), 0.0);
        a.validate().unwrap();
    }

    #[test]
    fn from_csr_validates() {
        assert!(SparseMatrix::from_csr(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(SparseMatrix::from_csr(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_csr(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        let a = SparseMatrix::from_csr(1, 3, vec![0, 2], vec![0, 2], vec![0.0, 4.0]).unwrap();
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(0, 2), 4.0);
    }

    #[test]
    fn transpose_roundtrip() {
        let a = SparseMatrix::from_triplets(3, 4, &[(0, 3, 1.0), (2, 0, -2.0), (1, 1, 0.5), (2, 3, 7.0)])
            .unwrap();
        let t = a.transpose();
        t.validate().unwrap();
        assert_eq!(t.get(3, 2), 7.0);
        assert_eq!(t.transpose(), a);
    }

    #[test]
    fn select_and_empty_columns() {
        let a = SparseMatrix::from_triplets(2, 4, &[(0, 0, 1.0), (1, 2, -1.0)]).unwrap();
        assert_eq!(a.empty_columns(), vec![1, 3]);
        let b = a.select_columns(&[0, 2]).unwrap();
        assert_eq!(b.ncols(), 2);
        assert_eq!(b.get(1, 1), -1.0);
    }

    #[test]
    fn gather_rows_out_of_range() {
        let a = SparseMatrix::identity(3);
        assert!(a.gather_scaled_rows(&[3], &[1.0]).is_err());
        let g = a.gather_scaled_rows(&[2, 2, 0], &[2.0, 3.0, 1.0]).unwrap();
        assert_eq!(g.nrows(), 3);
        assert_eq!(g.get(1, 2), 3.0);
    }
}
