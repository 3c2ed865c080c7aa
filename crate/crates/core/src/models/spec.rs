//! Declarative, seeded model instances shared by the benchmark harnesses.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::generate;
use super::io::{as_vector, column_vector};
use super::{build_group_lasso, build_irls, build_l2svm, build_lasso, build_logistic, build_quadratic, CompositeStructure, IrlsData, SvmData};
use crate::error::{BsumError, Result};
use crate::linalg::{self, norm_inf, DenseMatrix};
use crate::problem::{BlockPartition, ConstraintSet, Problem, Regularizer};
use crate::scalar::Scalar;
use crate::surrogate::Surrogate;

fn one() -> usize {
    1
}

fn default_ratio() -> f64 {
    0.1
}

fn default_density() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `||Ax - b||^2 + lambda ||x||_1` with `lambda = lambda_ratio * 2 ||A^T b||_inf`.
    Lasso {
        rows: usize,
        cols: usize,
        #[serde(default = "default_density")]
        density: f64,
        #[serde(default = "default_ratio")]
        lambda_ratio: f64,
        #[serde(default = "one")]
        block_size: usize,
    },
    /// Rank-deficient groups; `nu_k = nu_ratio * max_k 2 ||A_k^T b||`.
    GroupLasso {
        rows: usize,
        groups: usize,
        group_size: usize,
        rank: usize,
        #[serde(default = "default_ratio")]
        nu_ratio: f64,
    },
    /// `nu = nu_ratio * 1/2 ||A^T y||_inf`.
    Logistic {
        rows: usize,
        cols: usize,
        #[serde(default = "default_ratio")]
        nu_ratio: f64,
        #[serde(default = "one")]
        block_size: usize,
    },
    L2Svm {
        rows: usize,
        cols: usize,
        #[serde(default = "default_ratio")]
        lambda: f64,
        #[serde(default = "one")]
        block_size: usize,
    },
    FermatWeber {
        terms: usize,
        dim: usize,
        eta: f64,
    },
    /// Two-block quadratic whose first diagonal block is singular.
    TwoBlockQuadratic {
        n1: usize,
        n2: usize,
    },
}

impl ModelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Lasso { .. } => "lasso",
            ModelSpec::GroupLasso { .. } => "group-lasso",
            ModelSpec::Logistic { .. } => "logistic",
            ModelSpec::L2Svm { .. } => "l2-svm",
            ModelSpec::FermatWeber { .. } => "fermat-weber",
            ModelSpec::TwoBlockQuadratic { .. } => "two-block-quadratic",
        }
    }

    /// Block count of the built problem (`None` when the block size does not
    /// divide the dimension).
    pub fn num_blocks(&self) -> Option<usize> {
        let split = |n: usize, b: usize| (b > 0 && n.is_multiple_of(b)).then(|| n / b);
        match *self {
            ModelSpec::Lasso { cols, block_size, .. }
            | ModelSpec::Logistic { cols, block_size, .. }
            | ModelSpec::L2Svm { cols, block_size, .. } => split(cols, block_size),
            ModelSpec::GroupLasso { groups, .. } => Some(groups),
            ModelSpec::FermatWeber { .. } => Some(1),
            ModelSpec::TwoBlockQuadratic { .. } => Some(2),
        }
    }
}

/// A built instance plus the structure some certificates need.
#[derive(Clone)]
pub struct Instance<F: Scalar> {
    pub problem: Arc<Problem<F>>,
    pub composite: Option<CompositeStructure<F>>,
    pub svm: Option<SvmData<F>>,
    /// Model-specific surrogate (IRLS bound).
    pub custom_surrogate: Option<Surrogate<F>>,
    pub irls: Option<Arc<IrlsData<F>>>,
    pub x_true: Option<Vec<F>>,
}

impl<F: Scalar> Instance<F> {
    fn plain(problem: Problem<F>) -> Self {
        Self { problem: Arc::new(problem), composite: None, svm: None, custom_surrogate: None, irls: None, x_true: None }
    }
}

fn blocks(n: usize, size: usize) -> Result<BlockPartition> {
    if size == 0 || !n.is_multiple_of(size) {
        return Err(BsumError::InvalidPartition(format!("block size {size} does not divide dimension {n}")));
    }
    BlockPartition::uniform(n, size)
}

pub fn build_instance<F: Scalar>(spec: &ModelSpec, seed: u64) -> Result<Instance<F>> {
    match *spec {
        ModelSpec::Lasso { rows, cols, density, lambda_ratio, block_size } => {
            let (a, b) = generate::lasso_instance::<F>(rows, cols, density, seed)?;
            let lambda = F::of(lambda_ratio) * F::two() * norm_inf(&a.tmatvec(&b));
            let (p, comp) = build_lasso(a, b, lambda, blocks(cols, block_size)?, block_size == 1)?;
            Ok(Instance { composite: Some(comp), ..Instance::plain(p) })
        }
        ModelSpec::GroupLasso { rows, groups, group_size, rank, nu_ratio } => {
            let (mats, b) = generate::group_lasso_instance::<F>(rows, groups, group_size, rank, seed)?;
            let top = mats.iter().map(|m| F::two() * linalg::norm(&m.tmatvec(&b))).fold(F::zero(), F::max);
            let nu = vec![F::of(nu_ratio) * top; groups];
            let (p, comp) = build_group_lasso(&mats, b, &nu)?;
            Ok(Instance { composite: Some(comp), ..Instance::plain(p) })
        }
        ModelSpec::Logistic { rows, cols, nu_ratio, block_size } => {
            let (a, y) = generate::logistic_instance::<F>(rows, cols, seed)?;
            let nu = F::of(nu_ratio) * F::half() * norm_inf(&a.tmatvec(&y));
            Ok(Instance::plain(build_logistic(a, y, nu, blocks(cols, block_size)?)?))
        }
        ModelSpec::L2Svm { rows, cols, lambda, block_size } => {
            let a = generate::svm_instance::<F>(rows, cols, seed)?;
            let (p, data) = build_l2svm(a, blocks(cols, block_size)?, Regularizer::L1 { weight: F::of(lambda) })?;
            Ok(Instance { svm: Some(data), ..Instance::plain(p) })
        }
        ModelSpec::FermatWeber { terms, dim, eta } => {
            let t = generate::fermat_weber_instance::<F>(terms, dim, seed)?;
            let (p, s, data) = build_irls(t, F::of(eta), Regularizer::Zero, ConstraintSet::Free)?;
            Ok(Instance { custom_surrogate: Some(s), irls: Some(data), ..Instance::plain(p) })
        }
        ModelSpec::TwoBlockQuadratic { n1, n2 } => {
            let (q, c, part, x_true) = generate::two_block_quadratic::<F>(n1, n2, seed)?;
            let p = build_quadratic(q, c, part, vec![ConstraintSet::Free; 2])?;
            Ok(Instance { x_true: Some(x_true), ..Instance::plain(p) })
        }
    }
}

/// The seeded data of an instance as plain matrices, in the layout
/// [`instance_from_data`] reads back:
///
/// - lasso `[A, b]`, logistic `[A, y]`, l2-svm `[A]` (rows already signed),
/// - group-lasso `[A_1, .., A_G, b]`, fermat-weber `[A_1, b_1, .., A_J, b_J]`,
/// - two-block-quadratic `[Q, c]`.
pub fn generate_data<F: Scalar>(spec: &ModelSpec, seed: u64) -> Result<Vec<DenseMatrix<F>>> {
    Ok(match *spec {
        ModelSpec::Lasso { rows, cols, density, .. } => {
            let (a, b) = generate::lasso_instance::<F>(rows, cols, density, seed)?;
            vec![a, column_vector(&b)]
        }
        ModelSpec::GroupLasso { rows, groups, group_size, rank, .. } => {
            let (mut mats, b) = generate::group_lasso_instance::<F>(rows, groups, group_size, rank, seed)?;
            mats.push(column_vector(&b));
            mats
        }
        ModelSpec::Logistic { rows, cols, .. } => {
            let (a, y) = generate::logistic_instance::<F>(rows, cols, seed)?;
            vec![a, column_vector(&y)]
        }
        ModelSpec::L2Svm { rows, cols, .. } => vec![generate::svm_instance::<F>(rows, cols, seed)?],
        ModelSpec::FermatWeber { terms, dim, .. } => generate::fermat_weber_instance::<F>(terms, dim, seed)?
            .into_iter()
            .flat_map(|(a, b)| [a, column_vector(&b)])
            .collect(),
        ModelSpec::TwoBlockQuadratic { n1, n2 } => {
            let (q, c, _, _) = generate::two_block_quadratic::<F>(n1, n2, seed)?;
            vec![q, column_vector(&c)]
        }
    })
}

fn expect_shape<F: Scalar>(m: &DenseMatrix<F>, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.rows() != rows || m.cols() != cols {
        return Err(BsumError::Instance(format!("{what}: expected {rows}x{cols}, found {}x{}", m.rows(), m.cols())));
    }
    Ok(())
}

fn expect_count<F>(mats: &[DenseMatrix<F>], n: usize, family: &str) -> Result<()> {
    if mats.len() != n {
        return Err(BsumError::Instance(format!("{family} instance needs {n} matrices, found {}", mats.len())));
    }
    Ok(())
}

/// Builds an instance from matrices laid out as by [`generate_data`]. Shapes
/// must agree with the dimensions in `spec`.
pub fn instance_from_data<F: Scalar>(spec: &ModelSpec, mats: &[DenseMatrix<F>]) -> Result<Instance<F>> {
    let family = spec.family();
    match *spec {
        ModelSpec::Lasso { rows, cols, lambda_ratio, block_size, .. } => {
            expect_count(mats, 2, family)?;
            expect_shape(&mats[0], rows, cols, "A")?;
            let b = as_vector(&mats[1])?;
            expect_shape(&column_vector(&b), rows, 1, "b")?;
            let a = mats[0].clone();
            let lambda = F::of(lambda_ratio) * F::two() * norm_inf(&a.tmatvec(&b));
            let (p, comp) = build_lasso(a, b, lambda, blocks(cols, block_size)?, block_size == 1)?;
            Ok(Instance { composite: Some(comp), ..Instance::plain(p) })
        }
        ModelSpec::GroupLasso { rows, groups, group_size, nu_ratio, .. } => {
            expect_count(mats, groups + 1, family)?;
            for (k, m) in mats[..groups].iter().enumerate() {
                expect_shape(m, rows, group_size, &format!("A_{}", k + 1))?;
            }
            let b = as_vector(&mats[groups])?;
            expect_shape(&column_vector(&b), rows, 1, "b")?;
            let top = mats[..groups].iter().map(|m| F::two() * linalg::norm(&m.tmatvec(&b))).fold(F::zero(), F::max);
            let nu = vec![F::of(nu_ratio) * top; groups];
            let (p, comp) = build_group_lasso(&mats[..groups], b, &nu)?;
            Ok(Instance { composite: Some(comp), ..Instance::plain(p) })
        }
        ModelSpec::Logistic { rows, cols, nu_ratio, block_size } => {
            expect_count(mats, 2, family)?;
            expect_shape(&mats[0], rows, cols, "A")?;
            let y = as_vector(&mats[1])?;
            expect_shape(&column_vector(&y), rows, 1, "y")?;
            let a = mats[0].clone();
            let nu = F::of(nu_ratio) * F::half() * norm_inf(&a.tmatvec(&y));
            Ok(Instance::plain(build_logistic(a, y, nu, blocks(cols, block_size)?)?))
        }
        ModelSpec::L2Svm { rows, cols, lambda, block_size } => {
            expect_count(mats, 1, family)?;
            expect_shape(&mats[0], rows, cols, "A")?;
            let (p, data) = build_l2svm(mats[0].clone(), blocks(cols, block_size)?, Regularizer::L1 { weight: F::of(lambda) })?;
            Ok(Instance { svm: Some(data), ..Instance::plain(p) })
        }
        ModelSpec::FermatWeber { terms, dim, eta } => {
            expect_count(mats, 2 * terms, family)?;
            let mut t = Vec::with_capacity(terms);
            for j in 0..terms {
                let a = &mats[2 * j];
                if a.cols() != dim {
                    return Err(BsumError::Instance(format!("A_{}: expected {dim} columns, found {}", j + 1, a.cols())));
                }
                let b = as_vector(&mats[2 * j + 1])?;
                expect_shape(&column_vector(&b), a.rows(), 1, &format!("b_{}", j + 1))?;
                t.push((a.clone(), b));
            }
            let (p, s, data) = build_irls(t, F::of(eta), Regularizer::Zero, ConstraintSet::Free)?;
            Ok(Instance { custom_surrogate: Some(s), irls: Some(data), ..Instance::plain(p) })
        }
        ModelSpec::TwoBlockQuadratic { n1, n2 } => {
            expect_count(mats, 2, family)?;
            expect_shape(&mats[0], n1 + n2, n1 + n2, "Q")?;
            let c = as_vector(&mats[1])?;
            expect_shape(&column_vector(&c), n1 + n2, 1, "c")?;
            let p = build_quadratic(mats[0].clone(), c, BlockPartition::new(&[n1, n2])?, vec![ConstraintSet::Free; 2])?;
            Ok(Instance::plain(p))
        }
    }
}
