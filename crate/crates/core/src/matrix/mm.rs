//! Matrix Market exchange format (`coordinate real general`, `array real general`).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DenseMatrix, Matrix, MatrixOps, SparseMatrix};
use crate::error::{Error, Result};

enum Layout {
    Coordinate,
    Array,
}

fn mm_err(line: usize, msg: impl Into<String>) -> Error {
    Error::MatrixMarket {
        line,
        msg: msg.into(),
    }
}

fn parse_banner(line: &str) -> Result<Layout> {
    let toks: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(mm_err(1, format!("malformed banner: {line:?}")));
    }
    let layout = match toks[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(mm_err(1, format!("unsupported format {other:?}"))),
    };
    if toks[3] != "real" && toks[3] != "integer" {
        return Err(mm_err(1, format!("unsupported field {:?}", toks[3])));
    }
    if toks[4] != "general" {
        return Err(mm_err(1, format!("unsupported symmetry {:?}", toks[4])));
    }
    Ok(layout)
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| mm_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| mm_err(line, format!("cannot parse {what}")))
}

/// Reads a Matrix Market file. Coordinate files become [`Matrix::Sparse`],
/// array files [`Matrix::Dense`].
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<Matrix> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));

    let (_, banner) = lines.next().ok_or_else(|| mm_err(1, "empty file"))?;
    let layout = parse_banner(&banner?)?;

    let mut body = lines.filter_map(|(no, l)| match l {
        Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('%') => None,
        other => Some((no, other)),
    });

    let (size_no, size_line) = body.next().ok_or_else(|| mm_err(2, "missing size line"))?;
    let size_line = size_line?;
    let mut toks = size_line.split_whitespace();
    let rows: usize = parse_num(toks.next(), size_no, "row count")?;
    let cols: usize = parse_num(toks.next(), size_no, "column count")?;

    match layout {
        Layout::Coordinate => {
            let nnz: usize = parse_num(toks.next(), size_no, "entry count")?;
            let mut seen = HashSet::with_capacity(nnz);
            let mut trips = Vec::with_capacity(nnz);
            for (no, l) in body {
                let l = l?;
                let mut t = l.split_whitespace();
                let i: usize = parse_num(t.next(), no, "row index")?;
                let j: usize = parse_num(t.next(), no, "column index")?;
                let v: f64 = parse_num(t.next(), no, "value")?;
                if i == 0 || i > rows || j == 0 || j > cols {
                    return Err(mm_err(no, format!("index ({i}, {j}) out of range")));
                }
                if !v.is_finite() {
                    return Err(mm_err(no, "non-finite value"));
                }
                if !seen.insert((i, j)) {
                    return Err(mm_err(no, format!("duplicate entry ({i}, {j})")));
                }
                trips.push((i - 1, j - 1, v));
            }
            if trips.len() != nnz {
                return Err(mm_err(
                    size_no,
                    format!("declared {nnz} entries, found {}", trips.len()),
                ));
            }
            let m = SparseMatrix::from_triplets(rows, cols, &trips)?;
            m.validate()?;
            Ok(Matrix::Sparse(m))
        }
        Layout::Array => {
            let mut col_major = Vec::with_capacity(rows * cols);
            for (no, l) in body {
                let l = l?;
                let v: f64 = parse_num(l.split_whitespace().next(), no, "value")?;
                if !v.is_finite() {
                    return Err(mm_err(no, "non-finite value"));
                }
                if col_major.len() == rows * cols {
                    return Err(mm_err(no, "too many values"));
                }
                col_major.push(v);
            }
            if col_major.len() != rows * cols {
                return Err(mm_err(
                    size_no,
                    format!("expected {} values, found {}", rows * cols, col_major.len()),
                ));
            }
            Ok(Matrix::Dense(DenseMatrix::from_fn(rows, cols, |i, j| {
                col_major[j * rows + i]
            })))
        }
    }
}

/// Writes `a` with 17 significant digits, which round-trips every finite f64.
pub fn write_matrix_market(path: impl AsRef<Path>, a: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match a {
        Matrix::Sparse(s) => {
            writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
            writeln!(w, "{} {} {}", s.nrows(), s.ncols(), s.nnz())?;
            for (i, j, v) in s.triplets() {
                writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
            }
        }
        Matrix::Dense(d) => {
            writeln!(w, "%%MatrixMarket matrix array real general")?;
            writeln!(w, "{} {}", d.nrows(), d.ncols())?;
            for j in 0..d.ncols() {
                for i in 0..d.nrows() {
                    writeln!(w, "{:.16e}", d.get(i, j))?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn one_based_indices() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            &dir,
            "a.mtx",
            "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 1\n2 1 5.0\n",
        );
        let a = read_matrix_market(&p).unwrap().to_dense();
        assert_eq!(a.get(1, 0), 5.0);
        assert_eq!(a.get(0, 0), 0.0);
    }

    #[test]
    fn identity_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i3.mtx");
        let i3 = Matrix::Sparse(SparseMatrix::identity(3));
        write_matrix_market(&p, &i3).unwrap();
        assert_eq!(read_matrix_market(&p).unwrap(), i3);

        let d = Matrix::Dense(DenseMatrix::identity(3));
        write_matrix_market(&p, &d).unwrap();
        assert_eq!(read_matrix_market(&p).unwrap(), d);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1\n", 1),
            ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n3 1 2.0\n", 4),
            ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n", 4),
            ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 abc\n", 3),
            ("not a banner\n", 1),
        ];
        for (k, (body, line)) in cases.iter().enumerate() {
            let p = write_file(&dir, &format!("bad{k}.mtx"), body);
            match read_matrix_market(&p) {
                Err(Error::MatrixMarket { line: l, .. }) => assert_eq!(l, *line, "case {k}"),
                other => panic!("case {k}: expected error, got {other:?}"),
            }
        }
    }

    #[test]
    fn count_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            &dir,
            "short.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n",
        );
        assert!(matches!(
            read_matrix_market(&p),
            Err(Error::MatrixMarket { line: 2, .. })
        ));
    }
}
