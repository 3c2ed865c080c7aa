//! Synthetic quadratics `g(x) = x^T Q x + c^T x`.

use std::sync::Arc;

use crate::error::{BsumError, Result};
use crate::linalg::{self, rank_tolerance, spectral_radius_psd, DenseMatrix, SymmetricEigen};
use crate::models::block_solve::solve_quadratic_block;
use crate::problem::{BlockPartition, ConstraintSet, ExactBlockSolver, Problem, Regularizer, SmoothFunction};
use crate::scalar::Scalar;

const CLOSED_FORM_MAX_DIM: usize = 400;

pub struct Quadratic<F: Scalar> {
    q: DenseMatrix<F>,
    c: Vec<F>,
    partition: BlockPartition,
    diag_eigen: Vec<SymmetricEigen<F>>,
    m: F,
    mk: Vec<F>,
}

impl<F: Scalar> Quadratic<F> {
    pub fn new(q: DenseMatrix<F>, c: Vec<F>, partition: BlockPartition) -> Result<Self> {
        let n = partition.dim();
        if q.rows() != n || q.cols() != n || c.len() != n {
            return Err(BsumError::Dimension(format!("Q is {}x{}, c has length {}, partition covers {n}", q.rows(), q.cols(), c.len())));
        }
        let scale = F::one() + q.frobenius_norm();
        if !q.is_symmetric(F::of(1e-12) * scale) {
            return Err(BsumError::Parameter("asymmetric Q".into()));
        }
        let diag_eigen = (0..partition.num_blocks())
            .map(|k| SymmetricEigen::new(&q.sub_block(partition.range(k), partition.range(k))))
            .collect::<Result<Vec<_>>>()?;
        for (k, e) in diag_eigen.iter().enumerate() {
            if e.min_value() < -F::of(1e-10) * scale {
                return Err(BsumError::Parameter(format!("Q is not positive semidefinite (block {k})")));
            }
        }
        let m = F::two() * spectral_radius_psd(&q);
        let mk = diag_eigen.iter().map(|e| F::two() * e.max_value().max(F::zero())).collect();
        Ok(Self { q, c, partition, diag_eigen, m, mk })
    }

    pub fn matrix(&self) -> &DenseMatrix<F> {
        &self.q
    }

    pub fn linear(&self) -> &[F] {
        &self.c
    }

    fn block_full_rank(&self, k: usize) -> bool {
        self.diag_eigen[k].rank(rank_tolerance()) == self.partition.size(k)
    }
}

impl<F: Scalar> SmoothFunction<F> for Quadratic<F> {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn value(&self, x: &[F]) -> F {
        linalg::dot(x, &self.q.matvec(x)) + linalg::dot(&self.c, x)
    }

    fn gradient(&self, x: &[F]) -> Vec<F> {
        let mut g = linalg::scale(&self.q.matvec(x), F::two());
        linalg::axpy(F::one(), &self.c, &mut g);
        g
    }

    fn block_gradient(&self, k: usize, x: &[F]) -> Vec<F> {
        self.partition
            .range(k)
            .map(|i| F::two() * linalg::dot(self.q.row(i), x) + self.c[i])
            .collect()
    }

    fn lipschitz(&self) -> F {
        self.m
    }

    fn block_lipschitz(&self, k: usize) -> F {
        self.mk[k]
    }

    fn block_strong_convexity(&self, k: usize) -> Option<F> {
        if self.block_full_rank(k) {
            Some(F::two() * self.diag_eigen[k].min_value())
        } else {
            None
        }
    }

    fn exact_solver(&self) -> Option<&dyn ExactBlockSolver<F>> {
        Some(self)
    }

    fn closed_form_minimizer(&self) -> Option<Vec<F>> {
        if self.partition.dim() > CLOSED_FORM_MAX_DIM {
            return None;
        }
        let e = SymmetricEigen::new(&self.q).ok()?;
        Some(e.pinv_solve(&linalg::scale(&self.c, -F::half()), rank_tolerance()))
    }
}

impl<F: Scalar> ExactBlockSolver<F> for Quadratic<F> {
    fn minimize_block(
        &self,
        k: usize,
        anchor: &[F],
        h: &Regularizer<F>,
        set: &ConstraintSet<F>,
        proximal: Option<(F, &[F])>,
    ) -> Result<Vec<F>> {
        // v^T Q_kk v - 2 d^T v with d = -(Q_{k,-k} x_{-k} + c_k / 2).
        let range = self.partition.range(k);
        let d: Vec<F> = range
            .clone()
            .map(|i| {
                let row = self.q.row(i);
                let off: F = row
                    .iter()
                    .zip(anchor)
                    .enumerate()
                    .filter(|(j, _)| !range.contains(j))
                    .map(|(_, (&qij, &xj))| qij * xj)
                    .sum();
                -(off + self.c[i] * F::half())
            })
            .collect();
        solve_quadratic_block(&self.diag_eigen[k], &d, h, set, proximal)
    }

    fn unique_minimizer(&self, k: usize) -> Option<bool> {
        Some(self.block_full_rank(k))
    }
}

pub fn build_quadratic<F: Scalar>(
    q: DenseMatrix<F>,
    c: Vec<F>,
    partition: BlockPartition,
    constraints: Vec<ConstraintSet<F>>,
) -> Result<Problem<F>> {
    let k = partition.num_blocks();
    Problem::new(Arc::new(Quadratic::new(q, c, partition)?), vec![Regularizer::Zero; k], constraints)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn worked_example() -> Problem<f64> {
        let q = DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        build_quadratic(q, vec![0.0, 0.0], BlockPartition::scalar(2).unwrap(), vec![ConstraintSet::Free; 2]).unwrap()
    }

    #[test]
    fn worked_example_values() {
        let p = worked_example();
        assert_eq!(p.objective(&[1.0, 1.0]), 1.0);
        assert_eq!(p.block_gradient(0, &[1.0, 1.0]).unwrap(), vec![0.0]);
        assert_eq!(p.block_gradient(1, &[1.0, 1.0]).unwrap(), vec![2.0]);
        assert_eq!(p.gradient(&[1.0, 1.0]), vec![0.0, 2.0]);
    }

    #[test]
    fn identity_minimizer() {
        let p = build_quadratic(DenseMatrix::identity(2), vec![0.0, 0.0], BlockPartition::single(2).unwrap(), vec![ConstraintSet::Free]).unwrap();
        assert_eq!(p.smooth().closed_form_minimizer().unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn asymmetric_rejected() {
        let q = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        let r = build_quadratic(q, vec![0.0, 0.0], BlockPartition::scalar(2).unwrap(), vec![ConstraintSet::Free; 2]);
        assert!(r.unwrap_err().to_string().contains("asymmetric"));
    }
}
