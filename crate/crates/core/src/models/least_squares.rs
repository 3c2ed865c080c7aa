//! `g(x) = ||A x - b||^2` with LASSO and group-LASSO regularization.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BsumError, Result};
use crate::linalg::{self, gram_spectral_radius, rank_tolerance, DenseMatrix, SymmetricEigen};
use crate::models::block_solve::solve_quadratic_block;
use crate::problem::{BlockPartition, ConstraintSet, ExactBlockSolver, Problem, Regularizer, SmoothFunction};
use crate::scalar::Scalar;

/// Largest system for which the closed-form least-squares minimizer is formed.
const CLOSED_FORM_MAX_DIM: usize = 400;

pub struct LeastSquares<F: Scalar> {
    a: DenseMatrix<F>,
    b: Vec<F>,
    partition: BlockPartition,
    blocks: Vec<DenseMatrix<F>>,
    block_eigen: Vec<SymmetricEigen<F>>,
    m: F,
    mk: Vec<F>,
}

impl<F: Scalar> LeastSquares<F> {
    pub fn new(a: DenseMatrix<F>, b: Vec<F>, partition: BlockPartition) -> Result<Self> {
        if a.rows() != b.len() {
            return Err(BsumError::Dimension(format!("A has {} rows but b has length {}", a.rows(), b.len())));
        }
        if a.cols() != partition.dim() {
            return Err(BsumError::Dimension(format!("A has {} columns but the partition covers {}", a.cols(), partition.dim())));
        }
        let blocks: Vec<DenseMatrix<F>> = (0..partition.num_blocks()).map(|k| a.column_block(partition.range(k))).collect();
        let block_eigen = blocks.iter().map(|ak| SymmetricEigen::new(&ak.gram())).collect::<Result<Vec<_>>>()?;
        let m = F::two() * gram_spectral_radius(&a);
        let mk = blocks.iter().map(|ak| F::two() * gram_spectral_radius(ak)).collect();
        Ok(Self { a, b, partition, blocks, block_eigen, m, mk })
    }

    pub fn matrix(&self) -> &DenseMatrix<F> {
        &self.a
    }

    pub fn rhs(&self) -> &[F] {
        &self.b
    }

    pub fn block_matrix(&self, k: usize) -> &DenseMatrix<F> {
        &self.blocks[k]
    }

    /// Eigen-decomposition of `A_k^T A_k`.
    pub fn block_gram_eigen(&self, k: usize) -> &SymmetricEigen<F> {
        &self.block_eigen[k]
    }

    pub fn residual(&self, x: &[F]) -> Vec<F> {
        linalg::sub(&self.a.matvec(x), &self.b)
    }

    fn block_rank_full(&self, k: usize) -> bool {
        self.block_eigen[k].rank(rank_tolerance()) == self.partition.size(k)
    }
}

impl<F: Scalar> SmoothFunction<F> for LeastSquares<F> {
    fn name(&self) -> &str {
        "least-squares"
    }

    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn value(&self, x: &[F]) -> F {
        linalg::norm_sq(&self.residual(x))
    }

    fn gradient(&self, x: &[F]) -> Vec<F> {
        linalg::scale(&self.a.tmatvec(&self.residual(x)), F::two())
    }

    fn block_gradient(&self, k: usize, x: &[F]) -> Vec<F> {
        linalg::scale(&self.blocks[k].tmatvec(&self.residual(x)), F::two())
    }

    fn lipschitz(&self) -> F {
        self.m
    }

    fn block_lipschitz(&self, k: usize) -> F {
        self.mk[k]
    }

    fn block_strong_convexity(&self, k: usize) -> Option<F> {
        if self.block_rank_full(k) {
            Some(F::two() * self.block_eigen[k].min_value())
        } else {
            None
        }
    }

    fn exact_solver(&self) -> Option<&dyn ExactBlockSolver<F>> {
        Some(self)
    }

    fn closed_form_minimizer(&self) -> Option<Vec<F>> {
        if self.a.cols() > CLOSED_FORM_MAX_DIM {
            return None;
        }
        let eig = SymmetricEigen::new(&self.a.gram()).ok()?;
        Some(eig.pinv_solve(&self.a.tmatvec(&self.b), rank_tolerance()))
    }
}

impl<F: Scalar> ExactBlockSolver<F> for LeastSquares<F> {
    fn minimize_block(
        &self,
        k: usize,
        anchor: &[F],
        h: &Regularizer<F>,
        set: &ConstraintSet<F>,
        proximal: Option<(F, &[F])>,
    ) -> Result<Vec<F>> {
        // ||A_k v - r||^2 with r = b - A_{-k} x_{-k} = b - A x + A_k x_k.
        let ak = &self.blocks[k];
        let mut r = linalg::scale(&self.residual(anchor), -F::one());
        linalg::axpy(F::one(), &ak.matvec(self.partition.block(anchor, k)), &mut r);
        let d = ak.tmatvec(&r);
        solve_quadratic_block(&self.block_eigen[k], &d, h, set, proximal)
    }

    fn unique_minimizer(&self, k: usize) -> Option<bool> {
        Some(self.block_rank_full(k))
    }
}

/// Composite structure `g(x) = sum_i l^i(sum_k A^i_k x_k)` with per-term
/// strong convexity `eta^i_k` and cross-block Lipschitz constants `P^i_k`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompositeStructure<F> {
    pub terms: usize,
    /// `A^i_k`, indexed `[i][k]`.
    pub matrices: Vec<Vec<DenseMatrix<F>>>,
    pub linear_term: Vec<F>,
    /// `eta^i_k`, indexed `[i][k]`.
    pub eta: Vec<Vec<F>>,
    /// `P^i_k`, indexed `[i][k]`; upper bounds rather than tight values.
    pub p: Vec<Vec<F>>,
}

impl<F: Scalar> CompositeStructure<F> {
    /// `min_{i,k} eta^i_k`.
    pub fn eta_min(&self) -> F {
        self.eta.iter().flatten().copied().fold(F::infinity(), F::min)
    }

    /// `max_{i,k} ||A^i_k (A^i_k)^T|| (P^i_k)^2`.
    pub fn coupling_max(&self) -> F {
        let mut worst = F::zero();
        for (mats, ps) in self.matrices.iter().zip(&self.p) {
            for (a, &p) in mats.iter().zip(ps) {
                worst = worst.max(gram_spectral_radius(a) * p * p);
            }
        }
        worst
    }
}

/// Least-squares composite view: one term `l(y) = ||y - b||^2` (`eta = 2`),
/// `P_k = 2 sqrt(K - 1)` bounding the cross-block gradient coupling.
fn least_squares_composite<F: Scalar>(ls: &LeastSquares<F>) -> CompositeStructure<F> {
    let k = ls.partition.num_blocks();
    let p = F::two() * F::of_usize(k.saturating_sub(1).max(1)).sqrt();
    CompositeStructure {
        terms: 1,
        matrices: vec![ls.blocks.clone()],
        linear_term: ls.b.clone(),
        eta: vec![vec![F::two(); k]],
        p: vec![vec![p; k]],
    }
}

/// `min ||A x - b||^2 + lambda ||x||_1`. With `exact = true` every block must
/// have positive curvature (no zero columns for scalar blocks).
pub fn build_lasso<F: Scalar>(
    a: DenseMatrix<F>,
    b: Vec<F>,
    lambda: F,
    partition: BlockPartition,
    exact: bool,
) -> Result<(Problem<F>, CompositeStructure<F>)> {
    if !(lambda >= F::zero()) {
        return Err(BsumError::Parameter("lambda must be nonnegative".into()));
    }
    let ls = LeastSquares::new(a, b, partition)?;
    if exact {
        for k in 0..ls.partition.num_blocks() {
            if ls.blocks[k].frobenius_norm() == F::zero() {
                return Err(BsumError::Parameter(format!("block {k} of A is zero; exact block minimization needs strong convexity")));
            }
        }
    }
    let comp = least_squares_composite(&ls);
    let p = Problem::with_uniform(Arc::new(ls), Regularizer::L1 { weight: lambda })?;
    Ok((p, comp))
}

/// `min ||sum_k A_k x_k - b||^2 + sum_k nu_k ||x_k||_2`.
pub fn build_group_lasso<F: Scalar>(blocks: &[DenseMatrix<F>], b: Vec<F>, nu: &[F]) -> Result<(Problem<F>, CompositeStructure<F>)> {
    if blocks.is_empty() {
        return Err(BsumError::InvalidPartition("no blocks".into()));
    }
    if blocks.len() != nu.len() {
        return Err(BsumError::Dimension(format!("{} blocks but {} weights", blocks.len(), nu.len())));
    }
    let rows = blocks[0].rows();
    if let Some(k) = blocks.iter().position(|a| a.rows() != rows) {
        return Err(BsumError::Dimension(format!("block {k} has {} rows, expected {rows}", blocks[k].rows())));
    }
    let sizes: Vec<usize> = blocks.iter().map(DenseMatrix::cols).collect();
    let partition = BlockPartition::new(&sizes)?;
    let n = partition.dim();
    let mut a = DenseMatrix::zeros(rows, n);
    for (k, ak) in blocks.iter().enumerate() {
        let off = partition.offsets()[k];
        for i in 0..rows {
            for j in 0..ak.cols() {
                a.set(i, off + j, ak.get(i, j));
            }
        }
    }
    let ls = LeastSquares::new(a, b, partition)?;
    let comp = least_squares_composite(&ls);
    let h = nu.iter().map(|&w| Regularizer::GroupL2 { weight: w }).collect();
    let k = nu.len();
    let p = Problem::new(Arc::new(ls), h, vec![ConstraintSet::Free; k])?;
    Ok((p, comp))
}
