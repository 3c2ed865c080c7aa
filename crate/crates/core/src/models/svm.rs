//! L2-SVM loss `g(x) = sum_i [(1 - a_i^T x)^+]^2`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BsumError, Result};
use crate::linalg::{gram_spectral_radius, norm, DenseMatrix};
use crate::problem::{BlockPartition, ConstraintSet, ExactBlockSolver, Problem, Regularizer, SmoothFunction};
use crate::scalar::Scalar;

/// Rows `a_i` with their per-block slices `a_{i,k}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SvmData<F> {
    pub rows: DenseMatrix<F>,
    pub partition: BlockPartition,
}

impl<F: Scalar> SvmData<F> {
    pub fn num_rows(&self) -> usize {
        self.rows.rows()
    }

    /// `a_{i,k}`.
    pub fn row_block(&self, i: usize, k: usize) -> &[F] {
        &self.rows.row(i)[self.partition.range(k)]
    }

    /// `sum_k max_i ||a_{i,k}||`.
    pub fn block_norm_sum(&self) -> F {
        (0..self.partition.num_blocks())
            .map(|k| (0..self.num_rows()).map(|i| norm(self.row_block(i, k))).fold(F::zero(), F::max))
            .sum()
    }
}

pub struct L2Svm<F: Scalar> {
    data: SvmData<F>,
    blocks: Vec<DenseMatrix<F>>,
    m: F,
    mk: Vec<F>,
}

impl<F: Scalar> L2Svm<F> {
    pub fn new(rows: DenseMatrix<F>, partition: BlockPartition) -> Result<Self> {
        if rows.cols() != partition.dim() {
            return Err(BsumError::Dimension(format!("rows have dimension {} but the partition covers {}", rows.cols(), partition.dim())));
        }
        let blocks: Vec<DenseMatrix<F>> = (0..partition.num_blocks()).map(|k| rows.column_block(partition.range(k))).collect();
        let m = F::two() * gram_spectral_radius(&rows);
        let mk = blocks.iter().map(|b| F::two() * gram_spectral_radius(b)).collect();
        Ok(Self { data: SvmData { rows, partition }, blocks, m, mk })
    }

    pub fn data(&self) -> &SvmData<F> {
        &self.data
    }

    /// `q_i(x) = (1 - a_i^T x)^+`.
    pub fn hinge(&self, x: &[F]) -> Vec<F> {
        self.data.rows.matvec(x).into_iter().map(|z| (F::one() - z).max(F::zero())).collect()
    }
}

impl<F: Scalar> SmoothFunction<F> for L2Svm<F> {
    fn name(&self) -> &str {
        "l2-svm"
    }

    fn partition(&self) -> &BlockPartition {
        &self.data.partition
    }

    fn value(&self, x: &[F]) -> F {
        self.hinge(x).into_iter().map(|q| q * q).sum()
    }

    fn gradient(&self, x: &[F]) -> Vec<F> {
        let q = self.hinge(x);
        self.data.rows.tmatvec(&q).into_iter().map(|v| -(v + v)).collect()
    }

    fn block_gradient(&self, k: usize, x: &[F]) -> Vec<F> {
        let q = self.hinge(x);
        self.blocks[k].tmatvec(&q).into_iter().map(|v| -(v + v)).collect()
    }

    fn lipschitz(&self) -> F {
        self.m
    }

    fn block_lipschitz(&self, k: usize) -> F {
        self.mk[k]
    }

    fn exact_solver(&self) -> Option<&dyn ExactBlockSolver<F>> {
        Some(self)
    }
}

/// Minimizes `sum_i [(c_i - a_i v)^+]^2 + lambda |v| + rho/2 (v - center)^2`
/// over `[lo, hi]` by scanning the quadratic pieces between breakpoints.
pub fn svm_scalar_min<F: Scalar>(a: &[F], c: &[F], lambda: F, rho: F, center: F, lo: F, hi: F) -> Result<F> {
    let phi = |v: F| -> F {
        let loss: F = a.iter().zip(c).map(|(&ai, &ci)| (ci - ai * v).max(F::zero()).powi(2)).sum();
        loss + lambda * v.abs() + rho * F::half() * (v - center).powi(2)
    };
    let mut pts: Vec<F> = a.iter().zip(c).filter(|(&ai, _)| ai != F::zero()).map(|(&ai, &ci)| ci / ai).collect();
    if lambda > F::zero() {
        pts.push(F::zero());
    }
    pts.retain(|&p| p > lo && p < hi);
    pts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    pts.dedup();
    let mut knots = Vec::with_capacity(pts.len() + 2);
    knots.push(lo);
    knots.extend(pts);
    knots.push(hi);

    let mut best: Option<(F, F)> = None;
    for w in knots.windows(2) {
        let (p, q) = (w[0], w[1]);
        if !(p < q) {
            continue;
        }
        let mid = match (p.is_finite(), q.is_finite()) {
            (true, true) => p + (q - p) * F::half(),
            (false, true) => q - F::one() - q.abs(),
            (true, false) => p + F::one() + p.abs(),
            (false, false) => F::zero(),
        };
        let mut alpha = rho * F::half();
        let mut beta = -rho * center;
        for (&ai, &ci) in a.iter().zip(c) {
            if ci - ai * mid > F::zero() {
                alpha += ai * ai;
                beta -= F::two() * ai * ci;
            }
        }
        if mid > F::zero() {
            beta += lambda;
        } else if mid < F::zero() {
            beta -= lambda;
        }
        let v = if alpha > F::zero() {
            (-beta / (alpha + alpha)).max(p).min(q)
        } else if beta > F::zero() {
            p
        } else if beta < F::zero() {
            q
        } else {
            mid
        };
        if !v.is_finite() {
            continue;
        }
        let val = phi(v);
        if best.is_none_or(|(_, b)| val < b) {
            best = Some((v, val));
        }
    }
    best.map(|(v, _)| v).ok_or_else(|| BsumError::Unsupported("L2-SVM block subproblem is unbounded below".into()))
}

impl<F: Scalar> ExactBlockSolver<F> for L2Svm<F> {
    fn minimize_block(
        &self,
        k: usize,
        anchor: &[F],
        h: &Regularizer<F>,
        set: &ConstraintSet<F>,
        proximal: Option<(F, &[F])>,
    ) -> Result<Vec<F>> {
        let part = &self.data.partition;
        if part.size(k) != 1 {
            return Err(BsumError::Unsupported("exact L2-SVM solver needs scalar blocks".into()));
        }
        let xk = part.block(anchor, k)[0];
        let col = &self.blocks[k];
        let margins = self.data.rows.matvec(anchor);
        let a: Vec<F> = (0..col.rows()).map(|i| col.get(i, 0)).collect();
        let c: Vec<F> = margins.iter().zip(&a).map(|(&z, &ai)| F::one() - (z - ai * xk)).collect();
        let lambda = match h {
            Regularizer::L1 { weight } | Regularizer::GroupL2 { weight } => *weight,
            Regularizer::Zero | Regularizer::Indicator => F::zero(),
        };
        let (rho, center) = proximal.map_or((F::zero(), F::zero()), |(r, c)| (r, c[0]));
        let (lo, hi) = set.interval();
        Ok(vec![svm_scalar_min(&a, &c, lambda, rho, center, lo, hi)?])
    }
}

pub fn build_l2svm<F: Scalar>(rows: DenseMatrix<F>, partition: BlockPartition, h: Regularizer<F>) -> Result<(Problem<F>, SvmData<F>)> {
    let svm = L2Svm::new(rows, partition)?;
    let data = svm.data().clone();
    let p = Problem::with_uniform(Arc::new(svm), h)?;
    Ok((p, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_value() {
        let rows = DenseMatrix::<f64>::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.0]]).unwrap();
        let (p, data) = build_l2svm(rows, BlockPartition::scalar(2).unwrap(), Regularizer::Zero).unwrap();
        assert_eq!(p.objective(&[0.0, 0.0]), 3.0);
        assert_eq!(data.num_rows(), 3);
        assert!((data.block_norm_sum() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn single_row_block_min() {
        let rows = DenseMatrix::<f64>::from_rows(&[vec![2.0]]).unwrap();
        let (p, _) = build_l2svm(rows, BlockPartition::scalar(1).unwrap(), Regularizer::Zero).unwrap();
        let x = p.smooth().exact_solver().unwrap().minimize_block(0, &[0.0], p.nonsmooth(0), p.constraint(0), None).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15);
        assert_eq!(p.objective(&x), 0.0);
    }

    #[test]
    fn non_scalar_exact_unsupported() {
        let rows = DenseMatrix::<f64>::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let (p, _) = build_l2svm(rows, BlockPartition::single(2).unwrap(), Regularizer::Zero).unwrap();
        let r = p.smooth().exact_solver().unwrap().minimize_block(0, &[0.0, 0.0], p.nonsmooth(0), p.constraint(0), None);
        assert!(matches!(r, Err(BsumError::Unsupported(_))));
    }
}
