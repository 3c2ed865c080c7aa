//! Block-partitioned composite problems `f(x) = g(x) + sum_k h_k(x_k)` with
//! `x_k` restricted to `X_k`.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BsumError, Result};
use crate::linalg::{self, norm};
use crate::scalar::Scalar;

/// Contiguous partition of `{0, .., n-1}` into `K` blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl BlockPartition {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(BsumError::InvalidPartition("no blocks".into()));
        }
        if let Some(k) = sizes.iter().position(|&s| s == 0) {
            return Err(BsumError::InvalidPartition(format!("block {k} has size zero")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(Self { sizes: sizes.to_vec(), offsets, total: acc })
    }

    /// `n` scalar blocks.
    pub fn scalar(n: usize) -> Result<Self> {
        Self::new(&vec![1; n])
    }

    /// Blocks of equal size `block`; `n` must be a multiple of it.
    pub fn uniform(n: usize, block: usize) -> Result<Self> {
        if block == 0 || !n.is_multiple_of(block) {
            return Err(BsumError::InvalidPartition(format!("{n} is not a multiple of block size {block}")));
        }
        Self::new(&vec![block; n / block])
    }

    pub fn single(n: usize) -> Result<Self> {
        Self::new(&[n])
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.total
    }

    #[inline]
    pub fn size(&self, k: usize) -> usize {
        self.sizes[k]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    #[inline]
    pub fn range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k] + self.sizes[k]
    }

    pub fn check_index(&self, k: usize) -> Result<()> {
        if k < self.num_blocks() {
            Ok(())
        } else {
            Err(BsumError::BlockIndex { index: k, blocks: self.num_blocks() })
        }
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len == self.total {
            Ok(())
        } else {
            Err(BsumError::Dimension(format!("vector of length {len}, partition covers {}", self.total)))
        }
    }

    #[inline]
    pub fn block<'a, T>(&self, x: &'a [T], k: usize) -> &'a [T] {
        &x[self.range(k)]
    }

    #[inline]
    pub fn block_mut<'a, T>(&self, x: &'a mut [T], k: usize) -> &'a mut [T] {
        &mut x[self.range(k)]
    }

    /// Copy of `x` with block `k` replaced by `v`.
    pub fn with_block<T: Copy>(&self, x: &[T], k: usize, v: &[T]) -> Vec<T> {
        let mut out = x.to_vec();
        out[self.range(k)].copy_from_slice(v);
        out
    }
}

/// Closed convex block feasible set `X_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConstraintSet<F> {
    Free,
    Box { lo: Vec<F>, hi: Vec<F> },
    Ball { center: Vec<F>, radius: F },
    NonNegative,
}

impl<F: Scalar> ConstraintSet<F> {
    pub fn uniform_box(n: usize, lo: F, hi: F) -> Self {
        Self::Box { lo: vec![lo; n], hi: vec![hi; n] }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Self::Box { lo, hi } => {
                if lo.len() != n || hi.len() != n {
                    return Err(BsumError::Dimension(format!("box bounds of length {}/{} for block of size {n}", lo.len(), hi.len())));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(BsumError::Parameter("box with lo > hi".into()));
                }
                Ok(())
            }
            Self::Ball { center, radius } => {
                if center.len() != n {
                    return Err(BsumError::Dimension(format!("ball center of length {} for block of size {n}", center.len())));
                }
                if !(*radius >= F::zero()) {
                    return Err(BsumError::Parameter("ball radius must be nonnegative".into()));
                }
                Ok(())
            }
            Self::Free | Self::NonNegative => Ok(()),
        }
    }

    /// Euclidean projection `argmin_{u in X} 1/2 ||v - u||^2`.
    pub fn project(&self, v: &[F]) -> Vec<F> {
        match self {
            Self::Free => v.to_vec(),
            Self::Box { lo, hi } => v.iter().zip(lo.iter().zip(hi)).map(|(&x, (&l, &h))| x.max(l).min(h)).collect(),
            Self::NonNegative => v.iter().map(|&x| x.max(F::zero())).collect(),
            Self::Ball { center, radius } => {
                let d = linalg::sub(v, center);
                let nd = norm(&d);
                if nd <= *radius {
                    v.to_vec()
                } else {
                    let s = *radius / nd;
                    center.iter().zip(&d).map(|(&c, &di)| c + s * di).collect()
                }
            }
        }
    }

    pub fn contains(&self, v: &[F], tol: F) -> bool {
        match self {
            Self::Free => true,
            Self::Box { lo, hi } => v.iter().zip(lo.iter().zip(hi)).all(|(&x, (&l, &h))| x >= l - tol && x <= h + tol),
            Self::NonNegative => v.iter().all(|&x| x >= -tol),
            Self::Ball { center, radius } => linalg::dist(v, center) <= *radius + tol,
        }
    }

    /// Diameter of the set, `None` when unbounded.
    pub fn diameter(&self) -> Option<F> {
        match self {
            Self::Box { lo, hi } => {
                if lo.iter().chain(hi).any(|v| !v.is_finite()) {
                    None
                } else {
                    Some(linalg::dist(hi, lo))
                }
            }
            Self::Ball { radius, .. } => Some(*radius + *radius),
            Self::Free | Self::NonNegative => None,
        }
    }

    /// Scalar interval view for one-dimensional blocks.
    pub fn interval(&self) -> (F, F) {
        match self {
            Self::Free => (F::neg_infinity(), F::infinity()),
            Self::Box { lo, hi } => (lo[0], hi[0]),
            Self::NonNegative => (F::zero(), F::infinity()),
            Self::Ball { center, radius } => (center[0] - *radius, center[0] + *radius),
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, Self::Free)
    }
}

/// Nonsmooth block term `h_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Regularizer<F> {
    Zero,
    L1 { weight: F },
    GroupL2 { weight: F },
    /// The block is governed only by its constraint set; contributes zero on it.
    Indicator,
}

impl<F: Scalar> Regularizer<F> {
    pub fn value(&self, v: &[F]) -> F {
        match self {
            Self::Zero | Self::Indicator => F::zero(),
            Self::L1 { weight } => *weight * v.iter().fold(F::zero(), |s, x| s + x.abs()),
            Self::GroupL2 { weight } => *weight * norm(v),
        }
    }

    /// Lipschitz constant of `h_k` on a block of size `n`.
    pub fn lipschitz(&self, n: usize) -> F {
        match self {
            Self::Zero | Self::Indicator => F::zero(),
            Self::L1 { weight } => *weight * F::of_usize(n).sqrt(),
            Self::GroupL2 { weight } => *weight,
        }
    }

    pub fn weight(&self) -> F {
        match self {
            Self::Zero | Self::Indicator => F::zero(),
            Self::L1 { weight } | Self::GroupL2 { weight } => *weight,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero | Self::Indicator) || self.weight() == F::zero()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weight() < F::zero() || !self.weight().is_finite() {
            return Err(BsumError::Parameter("regularization weight must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::L1 { .. } => "l1",
            Self::GroupL2 { .. } => "group-l2",
            Self::Indicator => "indicator",
        }
    }
}

/// Smooth part `g` with gradient oracles and declared Lipschitz constants.
pub trait SmoothFunction<F: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn partition(&self) -> &BlockPartition;

    fn value(&self, x: &[F]) -> F;

    fn gradient(&self, x: &[F]) -> Vec<F>;

    /// `grad_k g(x)`; models override when cheaper than the full gradient.
    fn block_gradient(&self, k: usize, x: &[F]) -> Vec<F> {
        self.gradient(x)[self.partition().range(k)].to_vec()
    }

    /// `M`, global Lipschitz constant of the gradient.
    fn lipschitz(&self) -> F;

    /// `M_k`, Lipschitz constant of `grad_k g` in block `k`.
    fn block_lipschitz(&self, k: usize) -> F;

    /// Block-wise strong convexity modulus, if `g` is strongly convex in block `k`.
    fn block_strong_convexity(&self, _k: usize) -> Option<F> {
        None
    }

    fn exact_solver(&self) -> Option<&dyn ExactBlockSolver<F>> {
        None
    }

    /// Minimizer of `g` alone over all of R^n when it has a closed form.
    fn closed_form_minimizer(&self) -> Option<Vec<F>> {
        None
    }
}

/// Exact block minimization `argmin_{v in X_k} g(v, x_{-k}) + h_k(v)`.
pub trait ExactBlockSolver<F: Scalar>: Send + Sync {
    /// With `proximal = Some((rho, center))` the term `rho/2 ||v - center||^2`
    /// is added to the block objective.
    fn minimize_block(
        &self,
        k: usize,
        anchor: &[F],
        h: &Regularizer<F>,
        set: &ConstraintSet<F>,
        proximal: Option<(F, &[F])>,
    ) -> Result<Vec<F>>;

    /// Whether the block subproblem has a unique solution, when known.
    fn unique_minimizer(&self, _k: usize) -> Option<bool> {
        None
    }
}

#[derive(Clone)]
pub struct Problem<F: Scalar> {
    partition: BlockPartition,
    smooth: Arc<dyn SmoothFunction<F>>,
    nonsmooth: Vec<Regularizer<F>>,
    constraints: Vec<ConstraintSet<F>>,
}

impl<F: Scalar> fmt::Debug for Problem<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("smooth", &self.smooth.name())
            .field("partition", &self.partition)
            .field("nonsmooth", &self.nonsmooth)
            .field("constraints", &self.constraints)
            .finish()
    }
}

impl<F: Scalar> Problem<F> {
    pub fn new(
        smooth: Arc<dyn SmoothFunction<F>>,
        nonsmooth: Vec<Regularizer<F>>,
        constraints: Vec<ConstraintSet<F>>,
    ) -> Result<Self> {
        let partition = smooth.partition().clone();
        let k = partition.num_blocks();
        if nonsmooth.len() != k || constraints.len() != k {
            return Err(BsumError::Dimension(format!(
                "{} nonsmooth terms and {} constraint sets for {k} blocks",
                nonsmooth.len(),
                constraints.len()
            )));
        }
        for (i, (h, c)) in nonsmooth.iter().zip(&constraints).enumerate() {
            h.validate()?;
            c.validate(partition.size(i))?;
        }
        Ok(Self { partition, smooth, nonsmooth, constraints })
    }

    /// Unconstrained problem with the same regularizer on every block.
    pub fn with_uniform(smooth: Arc<dyn SmoothFunction<F>>, h: Regularizer<F>) -> Result<Self> {
        let k = smooth.partition().num_blocks();
        Self::new(smooth, vec![h; k], vec![ConstraintSet::Free; k])
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn smooth(&self) -> &dyn SmoothFunction<F> {
        self.smooth.as_ref()
    }

    pub fn smooth_arc(&self) -> Arc<dyn SmoothFunction<F>> {
        Arc::clone(&self.smooth)
    }

    pub fn nonsmooth(&self, k: usize) -> &Regularizer<F> {
        &self.nonsmooth[k]
    }

    pub fn constraint(&self, k: usize) -> &ConstraintSet<F> {
        &self.constraints[k]
    }

    pub fn nonsmooth_terms(&self) -> &[Regularizer<F>] {
        &self.nonsmooth
    }

    pub fn constraints(&self) -> &[ConstraintSet<F>] {
        &self.constraints
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.partition.num_blocks()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    fn feasibility_tol(v: &[F]) -> F {
        F::of(1e-10) * (F::one() + linalg::norm_inf(v))
    }

    pub fn block_feasible(&self, k: usize, v: &[F]) -> bool {
        self.constraints[k].contains(v, Self::feasibility_tol(v))
    }

    pub fn is_feasible(&self, x: &[F]) -> bool {
        (0..self.num_blocks()).all(|k| self.block_feasible(k, self.partition.block(x, k)))
    }

    /// `f(x) = g(x) + sum_k h_k(x_k)`, `+inf` outside `X`.
    pub fn objective(&self, x: &[F]) -> F {
        if !self.is_feasible(x) {
            return F::infinity();
        }
        self.smooth.value(x) + self.nonsmooth_value(x)
    }

    pub fn smooth_value(&self, x: &[F]) -> F {
        self.smooth.value(x)
    }

    pub fn nonsmooth_value(&self, x: &[F]) -> F {
        (0..self.num_blocks()).map(|k| self.nonsmooth[k].value(self.partition.block(x, k))).sum()
    }

    pub fn block_gradient(&self, k: usize, x: &[F]) -> Result<Vec<F>> {
        self.partition.check_index(k)?;
        self.partition.check_len(x.len())?;
        Ok(self.smooth.block_gradient(k, x))
    }

    pub fn gradient(&self, x: &[F]) -> Vec<F> {
        self.smooth.gradient(x)
    }

    /// Lipschitz constant of `h = sum_k h_k` w.r.t. the Euclidean norm.
    pub fn nonsmooth_lipschitz(&self) -> F {
        self.nonsmooth
            .iter()
            .enumerate()
            .map(|(k, h)| {
                let l = h.lipschitz(self.partition.size(k));
                l * l
            })
            .sum::<F>()
            .sqrt()
    }

    pub fn project(&self, x: &[F]) -> Vec<F> {
        let mut out = x.to_vec();
        for k in 0..self.num_blocks() {
            let p = self.constraints[k].project(self.partition.block(x, k));
            self.partition.block_mut(&mut out, k).copy_from_slice(&p);
        }
        out
    }

    pub fn all_free(&self) -> bool {
        self.constraints.iter().all(ConstraintSet::is_free)
    }

    pub fn all_smooth(&self) -> bool {
        self.nonsmooth.iter().all(Regularizer::is_zero)
    }

    /// Diameter of `X` when every block set is bounded.
    pub fn feasible_diameter(&self) -> Option<F> {
        let mut sq = F::zero();
        for c in &self.constraints {
            let d = c.diameter()?;
            sq += d * d;
        }
        Some(sq.sqrt())
    }
}

pub fn make_partition(sizes: &[usize]) -> Result<BlockPartition> {
    BlockPartition::new(sizes)
}

pub fn project<F: Scalar>(set: &ConstraintSet<F>, v: &[F]) -> Vec<F> {
    set.project(v)
}
