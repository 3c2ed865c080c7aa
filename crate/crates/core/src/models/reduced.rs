//! Single-block reduction of a two-block problem with an exactly solvable
//! second block: `l(x_1) = min_{x_2 in X_2} g(x_1, x_2) + h_2(x_2)`.

use std::sync::Arc;

use crate::error::{BsumError, Result};
use crate::problem::{BlockPartition, Problem, SmoothFunction};
use crate::scalar::Scalar;

pub struct ReducedTwoBlock<F: Scalar> {
    parent: Arc<Problem<F>>,
    partition: BlockPartition,
}

impl<F: Scalar> ReducedTwoBlock<F> {
    pub fn new(parent: Arc<Problem<F>>) -> Result<Self> {
        if parent.num_blocks() != 2 {
            return Err(BsumError::Unsupported("reduction needs exactly two blocks".into()));
        }
        if parent.smooth().exact_solver().is_none() {
            return Err(BsumError::Unsupported("reduction needs an exact solver for the second block".into()));
        }
        let partition = BlockPartition::single(parent.partition().size(0))?;
        Ok(Self { parent, partition })
    }

    /// `x_2^*(x_1)`.
    pub fn inner_minimizer(&self, x1: &[F]) -> Vec<F> {
        let part = self.parent.partition();
        let mut anchor = vec![F::zero(); part.dim()];
        part.block_mut(&mut anchor, 0).copy_from_slice(x1);
        self.parent
            .smooth()
            .exact_solver()
            .expect("checked at construction")
            .minimize_block(1, &anchor, self.parent.nonsmooth(1), self.parent.constraint(1), None)
            .expect("inner block subproblem solvable")
    }

    /// `(x_1, x_2^*(x_1))`.
    pub fn lift(&self, x1: &[F]) -> Vec<F> {
        let mut x = x1.to_vec();
        x.extend(self.inner_minimizer(x1));
        x
    }
}

impl<F: Scalar> SmoothFunction<F> for ReducedTwoBlock<F> {
    fn name(&self) -> &str {
        "reduced-two-block"
    }

    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn value(&self, x1: &[F]) -> F {
        let x = self.lift(x1);
        let x2 = self.parent.partition().block(&x, 1);
        self.parent.smooth_value(&x) + self.parent.nonsmooth(1).value(x2)
    }

    fn gradient(&self, x1: &[F]) -> Vec<F> {
        self.parent.smooth().block_gradient(0, &self.lift(x1))
    }

    fn lipschitz(&self) -> F {
        self.parent.smooth().block_lipschitz(0)
    }

    fn block_lipschitz(&self, _k: usize) -> F {
        self.parent.smooth().block_lipschitz(0)
    }
}

/// The reduced problem `min l(x_1) + h_1(x_1)` over `X_1`.
pub fn reduced_problem<F: Scalar>(parent: Arc<Problem<F>>) -> Result<(Problem<F>, Arc<ReducedTwoBlock<F>>)> {
    let h = parent.nonsmooth(0).clone();
    let set = parent.constraint(0).clone();
    let reduced = Arc::new(ReducedTwoBlock::new(parent)?);
    let p = Problem::new(Arc::clone(&reduced) as Arc<dyn SmoothFunction<F>>, vec![h], vec![set])?;
    Ok((p, reduced))
}
