//! Exact minimization of block quadratics
//! `v^T H v - 2 d^T v + h(v) [+ rho/2 ||v - c||^2]` over `X`.

use crate::error::{BsumError, Result};
use crate::linalg::{self, rank_tolerance, SymmetricEigen};
use crate::problem::{ConstraintSet, Regularizer};
use crate::scalar::Scalar;

/// Minimizes `a v^2 - 2 d v + lambda |v|` over `[lo, hi]` (`a >= 0`).
pub fn scalar_quadratic<F: Scalar>(a: F, d: F, lambda: F, lo: F, hi: F) -> Result<F> {
    let tiny = F::epsilon() * F::of(16.0);
    if a > tiny {
        let half = lambda * F::half();
        let soft = if d > half {
            d - half
        } else if d < -half {
            d + half
        } else {
            F::zero()
        };
        return Ok((soft / a).max(lo).min(hi));
    }
    // Linear pieces: slope for v > 0 is lambda - 2d, for v < 0 it is -lambda - 2d.
    let two_d = d + d;
    if lambda - two_d < F::zero() {
        if hi.is_finite() {
            Ok(hi)
        } else {
            Err(BsumError::Unsupported("block subproblem is unbounded below".into()))
        }
    } else if -lambda - two_d > F::zero() {
        if lo.is_finite() {
            Ok(lo)
        } else {
            Err(BsumError::Unsupported("block subproblem is unbounded below".into()))
        }
    } else {
        Ok(F::zero().max(lo).min(hi))
    }
}

/// Solves the block quadratic using the cached eigendecomposition of `H`.
/// Without strong convexity the minimum-norm minimizer is returned.
pub fn solve_quadratic_block<F: Scalar>(
    eigen: &SymmetricEigen<F>,
    d: &[F],
    h: &Regularizer<F>,
    set: &ConstraintSet<F>,
    proximal: Option<(F, &[F])>,
) -> Result<Vec<F>> {
    let n = d.len();
    let (shift, d) = match proximal {
        Some((rho, c)) => {
            let s = rho * F::half();
            (s, d.iter().zip(c).map(|(&di, &ci)| di + s * ci).collect::<Vec<F>>())
        }
        None => (F::zero(), d.to_vec()),
    };
    if n == 1 {
        let a = eigen.values[0].max(F::zero()) + shift;
        let (lo, hi) = set.interval();
        let lambda = match h {
            Regularizer::L1 { weight } | Regularizer::GroupL2 { weight } => *weight,
            Regularizer::Zero | Regularizer::Indicator => F::zero(),
        };
        return Ok(vec![scalar_quadratic(a, d[0], lambda, lo, hi)?]);
    }
    if !set.is_free() {
        return Err(BsumError::Unsupported("exact multi-dimensional block solve under constraints".into()));
    }
    let values: Vec<F> = eigen.values.iter().map(|&v| v.max(F::zero()) + shift).collect();
    let max = values.iter().copied().fold(F::zero(), F::max);
    let zero = max * rank_tolerance::<F>();
    let c = eigen.project(&d);
    match h {
        Regularizer::Zero | Regularizer::Indicator => {
            let coef: Vec<F> = c.iter().zip(&values).map(|(&ci, &mu)| if mu > zero { ci / mu } else { F::zero() }).collect();
            Ok(eigen.expand(&coef))
        }
        Regularizer::GroupL2 { weight } => {
            let nu = *weight;
            if linalg::norm(&d) <= nu * F::half() {
                return Ok(vec![F::zero(); n]);
            }
            if nu == F::zero() {
                let coef: Vec<F> = c.iter().zip(&values).map(|(&ci, &mu)| if mu > zero { ci / mu } else { F::zero() }).collect();
                return Ok(eigen.expand(&coef));
            }
            // Stationarity: v = t (2 t H + nu I)^{-1} 2 d with t = ||v||, where
            // t solves sum_i 4 c_i^2 / (2 mu_i t + nu)^2 = 1.
            let four = F::of(4.0);
            let phi = |t: F| -> F {
                c.iter()
                    .zip(&values)
                    .map(|(&ci, &mu)| {
                        let den = (mu + mu) * t + nu;
                        four * ci * ci / (den * den)
                    })
                    .sum::<F>()
                    - F::one()
            };
            let null: F = c.iter().zip(&values).filter(|(_, &mu)| mu <= zero).map(|(&ci, _)| four * ci * ci / (nu * nu)).sum();
            if null >= F::one() {
                return Err(BsumError::Unsupported("group-l2 block subproblem is unbounded below".into()));
            }
            let mut lo = F::zero();
            let mut hi = F::one();
            let mut guard = 0;
            while phi(hi) > F::zero() {
                lo = hi;
                hi = hi + hi;
                guard += 1;
                if guard > 2000 {
                    return Err(BsumError::Unsupported("group-l2 root bracket failed".into()));
                }
            }
            for _ in 0..300 {
                let mid = lo + (hi - lo) * F::half();
                if mid <= lo || mid >= hi {
                    break;
                }
                if phi(mid) > F::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = lo + (hi - lo) * F::half();
            let coef: Vec<F> = c
                .iter()
                .zip(&values)
                .map(|(&ci, &mu)| if mu > zero { F::two() * t * ci / ((mu + mu) * t + nu) } else { F::zero() })
                .collect();
            Ok(eigen.expand(&coef))
        }
        Regularizer::L1 { .. } => Err(BsumError::Unsupported("exact l1 solve on a multi-dimensional block".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    #[test]
    fn scalar_cases() {
        let inf = f64::INFINITY;
        assert_eq!(scalar_quadratic(1.0, 1.0, 0.5, -inf, inf).unwrap(), 0.75);
        assert_eq!(scalar_quadratic(1.0, 0.2, 0.5, -inf, inf).unwrap(), 0.0);
        assert_eq!(scalar_quadratic(1.0, 3.0, 0.0, -1.0, 1.0).unwrap(), 1.0);
        assert_eq!(scalar_quadratic(0.0, 0.1, 0.5, -inf, inf).unwrap(), 0.0);
        assert_eq!(scalar_quadratic(0.0, 1.0, 0.5, -2.0, 2.0).unwrap(), 2.0);
        assert!(scalar_quadratic(0.0, 1.0, 0.5, -inf, inf).is_err());
    }

    #[test]
    fn min_norm_on_singular_block() {
        // H = [[1,1],[1,1]], d = (1,1): every v with v1+v2 = 1 minimizes; min-norm is (0.5,0.5).
        let h = DenseMatrix::<f64>::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let e = SymmetricEigen::new(&h).unwrap();
        let v = solve_quadratic_block(&e, &[1.0, 1.0], &Regularizer::Zero, &ConstraintSet::Free, None).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12 && (v[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn group_shrink_identity() {
        // H = I: minimize ||v||^2 - 2 d^T v + nu ||v||  ->  v = d (1 - nu / (2||d||))^+.
        let e = SymmetricEigen::new(&DenseMatrix::<f64>::identity(2)).unwrap();
        let v = solve_quadratic_block(&e, &[3.0, 4.0], &Regularizer::GroupL2 { weight: 2.0 }, &ConstraintSet::Free, None).unwrap();
        assert!((v[0] - 2.4).abs() < 1e-12 && (v[1] - 3.2).abs() < 1e-12);
        let z = solve_quadratic_block(&e, &[0.3, 0.4], &Regularizer::GroupL2 { weight: 2.0 }, &ConstraintSet::Free, None).unwrap();
        assert_eq!(z, vec![0.0, 0.0]);
    }
}
