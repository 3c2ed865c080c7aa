//! Small dense linear algebra kernel: row-major matrices, vector helpers,
//! power iteration and a cyclic Jacobi eigensolver for symmetric matrices.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{BsumError, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> DenseMatrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, F::one());
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(BsumError::Dimension(format!(
                "{} values supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(BsumError::Dimension("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diagonal(values: &[F]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `A x`
    pub fn matvec(&self, x: &[F]) -> Vec<F> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `A^T y`
    pub fn tmatvec(&self, y: &[F]) -> Vec<F> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![F::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == F::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    /// `A^T A`
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for i in 0..self.rows {
            let r = self.row(i);
            for p in 0..n {
                if r[p] == F::zero() {
                    continue;
                }
                for q in p..n {
                    let v = g.get(p, q) + r[p] * r[q];
                    g.set(p, q, v);
                }
            }
        }
        for p in 0..n {
            for q in 0..p {
                let v = g.get(q, p);
                g.set(p, q, v);
            }
        }
        g
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(BsumError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == F::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Copy of the columns in `range`.
    pub fn column_block(&self, range: Range<usize>) -> Self {
        let start = range.start;
        Self::from_fn(self.rows, range.len(), |i, j| self.get(i, start + j))
    }

    /// Copy of the sub-matrix `rows x cols`.
    pub fn sub_block(&self, rows: Range<usize>, cols: Range<usize>) -> Self {
        let (r0, c0) = (rows.start, cols.start);
        Self::from_fn(rows.len(), cols.len(), |i, j| self.get(r0 + i, c0 + j))
    }

    pub fn is_symmetric(&self, tol: F) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.data.iter().fold(F::one(), |m, v| m.max(v.abs()));
        for i in 0..self.rows {
            for j in 0..i {
                if (self.get(i, j) - self.get(j, i)).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn frobenius_norm(&self) -> F {
        norm(&self.data)
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

#[inline]
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |s, (&x, &y)| s + x * y)
}

#[inline]
pub fn norm_sq<F: Scalar>(a: &[F]) -> F {
    dot(a, a)
}

#[inline]
pub fn norm<F: Scalar>(a: &[F]) -> F {
    norm_sq(a).sqrt()
}

pub fn norm_inf<F: Scalar>(a: &[F]) -> F {
    a.iter().fold(F::zero(), |m, v| m.max(v.abs()))
}

pub fn sub<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn scale<F: Scalar>(a: &[F], s: F) -> Vec<F> {
    a.iter().map(|&x| x * s).collect()
}

/// `y += alpha * x`
pub fn axpy<F: Scalar>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn dist_sq<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |s, (&x, &y)| s + (x - y) * (x - y))
}

pub fn dist<F: Scalar>(a: &[F], b: &[F]) -> F {
    dist_sq(a, b).sqrt()
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration.
///
/// Stops once successive Rayleigh quotients agree to `tol` (relative) or after
/// `max_iter` products. Returns zero for the zero operator.
pub fn power_iteration<F: Scalar>(
    dim: usize,
    apply: impl Fn(&[F]) -> Vec<F>,
    tol: F,
    max_iter: usize,
) -> F {
    if dim == 0 {
        return F::zero();
    }
    // fixed, non-symmetric start so the result is deterministic and unlikely
    // to be orthogonal to the leading eigenvector
    let mut v: Vec<F> = (0..dim)
        .map(|i| F::one() + F::of(((i * 7919) % 101) as f64 / 101.0))
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut lambda = F::zero();
    for _ in 0..max_iter {
        let w = apply(&v);
        let rayleigh = dot(&v, &w);
        let nw = norm(&w);
        if nw == F::zero() {
            return F::zero();
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let converged = (rayleigh - lambda).abs() <= tol * rayleigh.abs().max(F::min_positive_value());
        lambda = rayleigh;
        if converged {
            break;
        }
    }
    lambda
}

/// `rho_max` of a symmetric PSD matrix.
pub fn spectral_radius_psd<F: Scalar>(m: &DenseMatrix<F>) -> F {
    power_iteration(m.rows(), |v| m.matvec(v), F::of(1e-10), 10_000)
}

/// `rho_max(A^T A)` without forming the Gram matrix.
pub fn gram_spectral_radius<F: Scalar>(a: &DenseMatrix<F>) -> F {
    power_iteration(a.cols(), |v| a.tmatvec(&a.matvec(v)), F::of(1e-10), 10_000)
}

/// Eigen-decomposition of a symmetric matrix, `A = V diag(values) V^T`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<F> {
    /// Eigenvalues in ascending order.
    pub values: Vec<F>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: DenseMatrix<F>,
}

impl<F: Scalar> SymmetricEigen<F> {
    /// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
    pub fn new(m: &DenseMatrix<F>) -> Result<Self> {
        let n = m.rows();
        if m.cols() != n {
            return Err(BsumError::Dimension("eigen-decomposition needs a square matrix".into()));
        }
        let mut a = m.clone();
        let mut v = DenseMatrix::identity(n);
        let total = a.frobenius_norm();
        let eps = F::epsilon();

        for _sweep in 0..100 {
            let mut off = F::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a.get(p, q) * a.get(p, q);
                }
            }
            if off.sqrt() <= eps * total || off == F::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.abs() <= F::min_positive_value() {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (F::two() * apq);
                    let t = if theta == F::zero() {
                        F::one()
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt())
                    };
                    let c = F::one() / (t * t + F::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a.get(k, p), a.get(k, q));
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a.get(p, k), a.get(q, k));
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..n {
                        let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| a.get(i, i)).collect();
        let vectors = DenseMatrix::from_fn(n, n, |r, c| v.get(r, order[c]));
        Ok(Self { values, vectors })
    }

    pub fn max_value(&self) -> F {
        self.values.last().copied().unwrap_or_else(F::zero)
    }

    pub fn min_value(&self) -> F {
        self.values.first().copied().unwrap_or_else(F::zero)
    }

    /// Eigenvalues at or below `rel_tol * max(|lambda|)` are treated as zero.
    pub fn zero_threshold(&self, rel_tol: F) -> F {
        let scale = self.values.iter().fold(F::zero(), |m, v| m.max(v.abs()));
        rel_tol * scale
    }

    pub fn rank(&self, rel_tol: F) -> usize {
        let thr = self.zero_threshold(rel_tol);
        self.values.iter().filter(|v| v.abs() > thr).count()
    }

    /// Coordinates of `d` in the eigenbasis, `V^T d`.
    pub fn project(&self, d: &[F]) -> Vec<F> {
        self.vectors.tmatvec(d)
    }

    /// Maps eigenbasis coordinates back, `V c`.
    pub fn expand(&self, c: &[F]) -> Vec<F> {
        self.vectors.matvec(c)
    }

    /// Minimum-norm solution of `A x = d` (pseudo-inverse applied to `d`).
    pub fn pinv_solve(&self, d: &[F], rel_tol: F) -> Vec<F> {
        let thr = self.zero_threshold(rel_tol);
        let coords: Vec<F> = self
            .project(d)
            .into_iter()
            .zip(&self.values)
            .map(|(c, &lam)| if lam.abs() > thr { c / lam } else { F::zero() })
            .collect();
        self.expand(&coords)
    }
}

/// Default relative threshold below which eigenvalues count as zero.
pub fn rank_tolerance<F: Scalar>() -> F {
    F::epsilon() * F::of(1e4)
}
