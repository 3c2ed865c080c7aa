//! Smoothed sum of Euclidean norms `g(x) = sum_j sqrt(||A_j x + b_j||^2 + eta^2)`
//! and its AM-GM upper bound, under which SUM is the IRLS iteration.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BsumError, Result};
use crate::linalg::{self, rank_tolerance, spectral_radius_psd, DenseMatrix, SymmetricEigen};
use crate::models::block_solve::solve_quadratic_block;
use crate::problem::{BlockPartition, ConstraintSet, Problem, Regularizer, SmoothFunction};
use crate::scalar::Scalar;
use crate::surrogate::{prox_block, BlockConstants, CustomSurrogate, Surrogate};

const INNER_TOL: f64 = 1e-12;
const INNER_MAX_ITER: usize = 200_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IrlsData<F> {
    pub matrices: Vec<DenseMatrix<F>>,
    pub offsets: Vec<Vec<F>>,
    pub eta: F,
    /// `L = rho_max(sum_j A_j^T A_j) / eta`.
    pub lipschitz: F,
    partition: BlockPartition,
}

impl<F: Scalar> IrlsData<F> {
    pub fn new(terms: Vec<(DenseMatrix<F>, Vec<F>)>, eta: F) -> Result<Self> {
        if !(eta > F::zero()) {
            return Err(BsumError::Parameter("eta must be positive".into()));
        }
        if terms.is_empty() {
            return Err(BsumError::Parameter("at least one term is required".into()));
        }
        let n = terms[0].0.cols();
        for (j, (a, b)) in terms.iter().enumerate() {
            if a.cols() != n || a.rows() != b.len() {
                return Err(BsumError::Dimension(format!("term {j}: A is {}x{}, b has length {}", a.rows(), a.cols(), b.len())));
            }
        }
        let (matrices, offsets): (Vec<_>, Vec<_>) = terms.into_iter().unzip();
        let mut sum = DenseMatrix::<F>::zeros(n, n);
        for a in &matrices {
            let g = a.gram();
            sum = DenseMatrix::from_fn(n, n, |i, k| sum.get(i, k) + g.get(i, k));
        }
        let lipschitz = spectral_radius_psd(&sum) / eta;
        Ok(Self { matrices, offsets, eta, lipschitz, partition: BlockPartition::single(n)? })
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn num_terms(&self) -> usize {
        self.matrices.len()
    }

    /// `A_j x + b_j`.
    pub fn term_residual(&self, j: usize, x: &[F]) -> Vec<F> {
        linalg::add(&self.matrices[j].matvec(x), &self.offsets[j])
    }

    /// `s_j(x) = sqrt(||A_j x + b_j||^2 + eta^2)`.
    pub fn weights(&self, x: &[F]) -> Vec<F> {
        (0..self.num_terms()).map(|j| (linalg::norm_sq(&self.term_residual(j, x)) + self.eta * self.eta).sqrt()).collect()
    }

    /// Reweighted normal-equation data at `x`: `H = sum_j A_j^T A_j / s_j`,
    /// `l = sum_j A_j^T b_j / s_j`, so the bound is `1/2 v^T H v + l^T v + const`.
    pub fn reweighted_system(&self, x: &[F]) -> (DenseMatrix<F>, Vec<F>) {
        let n = self.dim();
        let s = self.weights(x);
        let mut h = DenseMatrix::zeros(n, n);
        let mut l = vec![F::zero(); n];
        for (j, a) in self.matrices.iter().enumerate() {
            let g = a.gram();
            h = DenseMatrix::from_fn(n, n, |r, c| h.get(r, c) + g.get(r, c) / s[j]);
            linalg::axpy(F::one() / s[j], &a.tmatvec(&self.offsets[j]), &mut l);
        }
        (h, l)
    }
}

pub struct SmoothedNormSum<F: Scalar> {
    data: Arc<IrlsData<F>>,
}

impl<F: Scalar> SmoothFunction<F> for SmoothedNormSum<F> {
    fn name(&self) -> &str {
        "irls"
    }

    fn partition(&self) -> &BlockPartition {
        &self.data.partition
    }

    fn value(&self, x: &[F]) -> F {
        self.data.weights(x).into_iter().sum()
    }

    fn gradient(&self, x: &[F]) -> Vec<F> {
        let s = self.data.weights(x);
        let mut g = vec![F::zero(); self.data.dim()];
        for (j, a) in self.data.matrices.iter().enumerate() {
            linalg::axpy(F::one() / s[j], &a.tmatvec(&self.data.term_residual(j, x)), &mut g);
        }
        g
    }

    fn lipschitz(&self) -> F {
        self.data.lipschitz
    }

    fn block_lipschitz(&self, _k: usize) -> F {
        self.data.lipschitz
    }
}

/// `u(v; x) = 1/2 sum_j ((||A_j v + b_j||^2 + eta^2) / s_j(x) + s_j(x))`.
pub struct IrlsBound<F: Scalar> {
    data: Arc<IrlsData<F>>,
}

impl<F: Scalar> IrlsBound<F> {
    fn inner_prox_gradient(
        h_mat: &DenseMatrix<F>,
        lin: &[F],
        h: &Regularizer<F>,
        set: &ConstraintSet<F>,
        prox: Option<(F, &[F])>,
    ) -> Result<Vec<F>> {
        let (rho, center) = prox.map_or((F::zero(), None), |(r, c)| (r, Some(c)));
        let step = spectral_radius_psd(h_mat) + rho;
        let mut v = set.project(&vec![F::zero(); lin.len()]);
        if let Some(c) = center {
            v = set.project(c);
        }
        for _ in 0..INNER_MAX_ITER {
            let mut grad = linalg::add(&h_mat.matvec(&v), lin);
            if let Some(c) = center {
                linalg::axpy(rho, &linalg::sub(&v, c), &mut grad);
            }
            let trial: Vec<F> = v.iter().zip(&grad).map(|(&vi, &gi)| vi - gi / step).collect();
            let next = prox_block(h, set, step, &trial)?;
            let moved = linalg::dist(&next, &v);
            v = next;
            if moved <= F::of(INNER_TOL) * (F::one() + linalg::norm(&v)) {
                break;
            }
        }
        Ok(v)
    }
}

impl<F: Scalar> CustomSurrogate<F> for IrlsBound<F> {
    fn name(&self) -> &str {
        "irls-bound"
    }

    fn value(&self, _k: usize, v_k: &[F], anchor: &[F]) -> F {
        let s = self.data.weights(anchor);
        let eta2 = self.data.eta * self.data.eta;
        F::half()
            * (0..self.data.num_terms())
                .map(|j| (linalg::norm_sq(&self.data.term_residual(j, v_k)) + eta2) / s[j] + s[j])
                .sum::<F>()
    }

    fn argmin(&self, _k: usize, anchor: &[F], h: &Regularizer<F>, set: &ConstraintSet<F>, proximal: Option<F>) -> Result<Vec<F>> {
        let (h_mat, lin) = self.data.reweighted_system(anchor);
        let prox = proximal.map(|rho| (rho, anchor));
        let n = lin.len();
        let closed = n == 1 || (set.is_free() && matches!(h, Regularizer::Zero | Regularizer::Indicator | Regularizer::GroupL2 { .. }));
        if closed {
            let half = h_mat.map(|v| v * F::half());
            let eig = SymmetricEigen::new(&half)?;
            let d = linalg::scale(&lin, -F::half());
            if matches!(h, Regularizer::Zero | Regularizer::Indicator) && set.is_free() && prox.is_none() {
                return Ok(eig.pinv_solve(&d, rank_tolerance()));
            }
            return solve_quadratic_block(&eig, &d, h, set, prox);
        }
        Self::inner_prox_gradient(&h_mat, &lin, h, set, prox)
    }

    fn constants(&self, _k: usize) -> BlockConstants<F> {
        BlockConstants { gamma: F::zero(), lipschitz: self.data.lipschitz, anchor_lipschitz: F::zero() }
    }
}

pub fn build_irls<F: Scalar>(
    terms: Vec<(DenseMatrix<F>, Vec<F>)>,
    eta: F,
    h: Regularizer<F>,
    set: ConstraintSet<F>,
) -> Result<(Problem<F>, Surrogate<F>, Arc<IrlsData<F>>)> {
    let data = Arc::new(IrlsData::new(terms, eta)?);
    let p = Problem::new(Arc::new(SmoothedNormSum { data: Arc::clone(&data) }), vec![h], vec![set])?;
    let s = Surrogate::custom(&p, Arc::new(IrlsBound { data: Arc::clone(&data) }));
    Ok((p, s, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{surrogate_argmin, surrogate_value};

    fn scalar_instance(eta: f64) -> (Problem<f64>, Surrogate<f64>, Arc<IrlsData<f64>>) {
        build_irls(vec![(DenseMatrix::identity(1), vec![0.0])], eta, Regularizer::Zero, ConstraintSet::Free).unwrap()
    }

    #[test]
    fn tight_at_anchor() {
        let (p, s, _) = scalar_instance(1.0);
        assert_eq!(p.smooth_value(&[0.0]), 1.0);
        assert_eq!(surrogate_value(&s, &p, 0, &[0.0], &[0.0]), 1.0);
    }

    #[test]
    fn am_gm_bound() {
        let (p, s, _) = scalar_instance(1.0);
        let r2 = 2f64.sqrt();
        for &x in &[-2.0, -0.5, 0.0, 0.3, 1.0, 4.0] {
            let u = surrogate_value(&s, &p, 0, &[x], &[1.0]);
            let expected = ((x * x + 1.0) / r2 + r2) / 2.0;
            assert!((u - expected).abs() < 1e-14);
            assert!(u >= (x * x + 1.0f64).sqrt() - 1e-15);
        }
        assert!((surrogate_value(&s, &p, 0, &[1.0], &[1.0]) - r2).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_constant() {
        let (_, _, d) = scalar_instance(0.5);
        assert!((d.lipschitz - 2.0).abs() < 1e-12);
        assert!(IrlsData::new(vec![(DenseMatrix::<f64>::identity(1), vec![0.0])], 0.0).is_err());
    }

    #[test]
    fn inner_loop_matches_closed_form_in_1d() {
        let terms = vec![
            (DenseMatrix::from_rows(&[vec![1.0, 0.5]]).unwrap(), vec![-1.0]),
            (DenseMatrix::from_rows(&[vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap(), vec![0.5, -2.0]),
        ];
        let (p, s, _) = build_irls(terms, 0.3, Regularizer::L1 { weight: 0.2 }, ConstraintSet::Free).unwrap();
        let x = surrogate_argmin(&s, &p, 0, &[0.2, -0.1]).unwrap();
        // First-order optimality of the convex bound: a prox step leaves x fixed.
        let (hm, l) = IrlsData::new(
            vec![
                (DenseMatrix::from_rows(&[vec![1.0, 0.5]]).unwrap(), vec![-1.0]),
                (DenseMatrix::from_rows(&[vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap(), vec![0.5, -2.0]),
            ],
            0.3,
        )
        .unwrap()
        .reweighted_system(&[0.2, -0.1]);
        let g = linalg::add(&hm.matvec(&x), &l);
        let t: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
        let back = prox_block(&Regularizer::L1 { weight: 0.2 }, &ConstraintSet::Free, 1.0, &t).unwrap();
        assert!(linalg::dist(&back, &x) < 1e-9);
    }
}
