//! Sparse logistic regression `sum_i log(1 + exp(-y_i a_i^T x)) + nu ||x||_1`.

use std::sync::Arc;

use crate::error::{BsumError, Result};
use crate::linalg::{gram_spectral_radius, DenseMatrix};
use crate::problem::{BlockPartition, Problem, Regularizer, SmoothFunction};
use crate::scalar::Scalar;

pub struct Logistic<F: Scalar> {
    a: DenseMatrix<F>,
    y: Vec<F>,
    partition: BlockPartition,
    blocks: Vec<DenseMatrix<F>>,
    m: F,
    mk: Vec<F>,
}

/// `log(1 + exp(z))` without overflow.
fn softplus<F: Scalar>(z: F) -> F {
    if z > F::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-z))`.
fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

impl<F: Scalar> Logistic<F> {
    pub fn new(a: DenseMatrix<F>, y: Vec<F>, partition: BlockPartition) -> Result<Self> {
        if a.rows() != y.len() {
            return Err(BsumError::Dimension(format!("{} rows but {} labels", a.rows(), y.len())));
        }
        if a.cols() != partition.dim() {
            return Err(BsumError::Dimension(format!("A has {} columns but the partition covers {}", a.cols(), partition.dim())));
        }
        if let Some(i) = y.iter().position(|&v| v != F::one() && v != -F::one()) {
            return Err(BsumError::Parameter(format!("label {i} is {}, expected -1 or +1", y[i])));
        }
        let blocks: Vec<DenseMatrix<F>> = (0..partition.num_blocks()).map(|k| a.column_block(partition.range(k))).collect();
        let m = F::half() * gram_spectral_radius(&a);
        let mk = blocks.iter().map(|b| F::half() * gram_spectral_radius(b)).collect();
        Ok(Self { a, y, partition, blocks, m, mk })
    }

    /// `-y_i sigma(-y_i a_i^T x)`, the derivative of each loss term in its margin.
    fn weights(&self, x: &[F]) -> Vec<F> {
        self.a.matvec(x).iter().zip(&self.y).map(|(&z, &y)| -y * sigmoid(-y * z)).collect()
    }
}

impl<F: Scalar> SmoothFunction<F> for Logistic<F> {
    fn name(&self) -> &str {
        "logistic"
    }

    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn value(&self, x: &[F]) -> F {
        self.a.matvec(x).iter().zip(&self.y).map(|(&z, &y)| softplus(-y * z)).sum()
    }

    fn gradient(&self, x: &[F]) -> Vec<F> {
        self.a.tmatvec(&self.weights(x))
    }

    fn block_gradient(&self, k: usize, x: &[F]) -> Vec<F> {
        self.blocks[k].tmatvec(&self.weights(x))
    }

    fn lipschitz(&self) -> F {
        self.m
    }

    fn block_lipschitz(&self, k: usize) -> F {
        self.mk[k]
    }
}

pub fn build_logistic<F: Scalar>(a: DenseMatrix<F>, y: Vec<F>, nu: F, partition: BlockPartition) -> Result<Problem<F>> {
    if !(nu >= F::zero()) {
        return Err(BsumError::Parameter("nu must be nonnegative".into()));
    }
    Problem::with_uniform(Arc::new(Logistic::new(a, y, partition)?), Regularizer::L1 { weight: nu })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_origin() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, 3.0]]).unwrap();
        let y = vec![1.0, -1.0, 1.0];
        let p = build_logistic(a, y, 0.1, BlockPartition::scalar(2).unwrap()).unwrap();
        assert!((p.smooth_value(&[0.0, 0.0]) - 3.0 * 2f64.ln()).abs() < 1e-14);
        // -1/2 sum y_i a_i = -1/2 (2, 4.5)
        let g = p.gradient(&[0.0, 0.0]);
        assert!((g[0] + 1.0).abs() < 1e-15 && (g[1] + 2.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_labels() {
        let a = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(build_logistic(a, vec![0.0], 0.1, BlockPartition::scalar(1).unwrap()).is_err());
    }

    #[test]
    fn stable_for_large_margins() {
        assert!((softplus(800.0f64) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0f64) >= 0.0);
        assert_eq!(sigmoid(-800.0f64), 0.0);
    }
}
