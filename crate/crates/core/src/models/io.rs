//! Plain-text instance files: one or more matrices, each a header line
//! `rows cols` followed by whitespace-separated row-major values. Vectors are
//! stored as `n 1` matrices. Lines starting with `#` are ignored.

use std::fmt::Write as _;

use crate::error::{BsumError, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

pub fn write_matrices<F: Scalar>(mats: &[&DenseMatrix<F>]) -> String {
    let mut out = String::new();
    for m in mats {
        let _ = writeln!(out, "{} {}", m.rows(), m.cols());
        for i in 0..m.rows() {
            let row: Vec<String> = m.row(i).iter().map(|v| format!("{:.16e}", v.to_f64_lossy())).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out
}

pub fn read_matrices<F: Scalar>(text: &str) -> Result<Vec<DenseMatrix<F>>> {
    let mut tokens = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#'))
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)));
    let mut out = Vec::new();
    while let Some((line, r)) = tokens.next() {
        let rows: usize = r.parse().map_err(|_| BsumError::Instance(format!("line {line}: bad row count '{r}'")))?;
        let (line_c, c) = tokens.next().ok_or_else(|| BsumError::Instance(format!("line {line}: missing column count")))?;
        let cols: usize = c.parse().map_err(|_| BsumError::Instance(format!("line {line_c}: bad column count '{c}'")))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let (l, t) = tokens
                .next()
                .ok_or_else(|| BsumError::Instance(format!("matrix starting at line {line}: expected {} values", rows * cols)))?;
            let v: f64 = t.parse().map_err(|_| BsumError::Instance(format!("line {l}: bad value '{t}'")))?;
            data.push(F::of(v));
        }
        out.push(DenseMatrix::from_row_major(rows, cols, data)?);
    }
    if out.is_empty() {
        return Err(BsumError::Instance("no matrices found".into()));
    }
    Ok(out)
}

pub fn column_vector<F: Scalar>(v: &[F]) -> DenseMatrix<F> {
    DenseMatrix::from_fn(v.len(), 1, |i, _| v[i])
}

/// Flattens an `n x 1` or `1 x n` matrix.
pub fn as_vector<F: Scalar>(m: &DenseMatrix<F>) -> Result<Vec<F>> {
    if m.cols() == 1 || m.rows() == 1 {
        Ok(m.as_slice().to_vec())
    } else {
        Err(BsumError::Instance(format!("expected a vector, found a {}x{} matrix", m.rows(), m.cols())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.1], vec![-3.5, 1.0 / 3.0]]).unwrap();
        let b = column_vector(&[0.2, 7.0]);
        let text = write_matrices(&[&a, &b]);
        let back = read_matrices::<f64>(&text).unwrap();
        assert_eq!(back[0], a);
        assert_eq!(as_vector(&back[1]).unwrap(), vec![0.2, 7.0]);
    }

    #[test]
    fn errors() {
        assert!(read_matrices::<f64>("2 2\n1 2 3").is_err());
        assert!(read_matrices::<f64>("x 2").is_err());
        assert!(read_matrices::<f64>("# only a comment\n").is_err());
    }
}
