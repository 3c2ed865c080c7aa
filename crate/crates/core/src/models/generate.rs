//! Seeded synthetic instances. Every generator draws from its own stream
//! derived from `(seed, family)`.

use crate::error::{BsumError, Result};
use crate::linalg::{self, DenseMatrix, SymmetricEigen};
use crate::problem::BlockPartition;
use crate::rng::{self, SeededRng};
use crate::scalar::Scalar;

fn stream(seed: u64, family: &str) -> SeededRng {
    rng::seeded(rng::derive_seed(seed, family))
}

fn gaussian_matrix<F: Scalar>(rng: &mut SeededRng, rows: usize, cols: usize) -> DenseMatrix<F> {
    DenseMatrix::from_fn(rows, cols, |_, _| rng::gaussian(rng))
}

/// Gaussian design, sparse ground truth, noisy observations.
pub fn lasso_instance<F: Scalar>(rows: usize, cols: usize, density: f64, seed: u64) -> Result<(DenseMatrix<F>, Vec<F>)> {
    if rows == 0 || cols == 0 {
        return Err(BsumError::Parameter("instance dimensions must be positive".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(BsumError::Parameter("density must lie in (0,1]".into()));
    }
    let mut rng = stream(seed, "lasso");
    let scale = F::one() / F::of_usize(rows).sqrt();
    let a = DenseMatrix::from_fn(rows, cols, |_, _| rng::gaussian::<F>(&mut rng) * scale);
    let truth: Vec<F> = (0..cols)
        .map(|_| {
            let keep: f64 = rng::uniform(&mut rng, 0.0, 1.0);
            let v: F = rng::gaussian(&mut rng);
            if keep < density {
                v
            } else {
                F::zero()
            }
        })
        .collect();
    let mut b = a.matvec(&truth);
    for bi in &mut b {
        *bi += F::of(0.05) * rng::gaussian::<F>(&mut rng);
    }
    Ok((a, b))
}

/// `groups` blocks of `group_size` columns, each block of rank `rank`.
pub fn group_lasso_instance<F: Scalar>(
    rows: usize,
    groups: usize,
    group_size: usize,
    rank: usize,
    seed: u64,
) -> Result<(Vec<DenseMatrix<F>>, Vec<F>)> {
    if rows == 0 || groups == 0 || group_size == 0 || rank == 0 || rank > group_size {
        return Err(BsumError::Parameter("need positive dimensions and 1 <= rank <= group_size".into()));
    }
    let mut rng = stream(seed, "group-lasso");
    let scale = F::one() / F::of_usize(rows).sqrt();
    let mut blocks = Vec::with_capacity(groups);
    for _ in 0..groups {
        let left = gaussian_matrix::<F>(&mut rng, rows, rank);
        let right = gaussian_matrix::<F>(&mut rng, rank, group_size);
        blocks.push(left.matmul(&right)?.map(|v| v * scale));
    }
    let b = (0..rows).map(|_| rng::gaussian::<F>(&mut rng)).collect();
    Ok((blocks, b))
}

/// Features with labels from a noisy linear classifier.
pub fn logistic_instance<F: Scalar>(rows: usize, cols: usize, seed: u64) -> Result<(DenseMatrix<F>, Vec<F>)> {
    if rows == 0 || cols == 0 {
        return Err(BsumError::Parameter("instance dimensions must be positive".into()));
    }
    let mut rng = stream(seed, "logistic");
    let a = gaussian_matrix::<F>(&mut rng, rows, cols);
    let w = rng::gaussian_vec::<F>(&mut rng, cols);
    let z = a.matvec(&w);
    let y = z
        .iter()
        .map(|&zi| {
            let noise: F = rng::gaussian(&mut rng);
            if zi + noise >= F::zero() {
                F::one()
            } else {
                -F::one()
            }
        })
        .collect();
    Ok((a, y))
}

/// Rows `a_i = y_i z_i` of a label-signed feature matrix.
pub fn svm_instance<F: Scalar>(rows: usize, cols: usize, seed: u64) -> Result<DenseMatrix<F>> {
    let (z, y) = {
        if rows == 0 || cols == 0 {
            return Err(BsumError::Parameter("instance dimensions must be positive".into()));
        }
        let mut rng = stream(seed, "l2svm");
        let z = gaussian_matrix::<F>(&mut rng, rows, cols);
        let w = rng::gaussian_vec::<F>(&mut rng, cols);
        let margins = z.matvec(&w);
        let y: Vec<F> = margins
            .iter()
            .map(|&m| {
                let flip: f64 = rng::uniform(&mut rng, 0.0, 1.0);
                let s = if m >= F::zero() { F::one() } else { -F::one() };
                if flip < 0.1 {
                    -s
                } else {
                    s
                }
            })
            .collect();
        (z, y)
    };
    Ok(DenseMatrix::from_fn(rows, cols, |i, j| y[i] * z.get(i, j)))
}

/// Fermat-Weber terms `A_j = omega_j I`, `b_j = -omega_j p_j`.
pub fn fermat_weber_instance<F: Scalar>(terms: usize, dim: usize, seed: u64) -> Result<Vec<(DenseMatrix<F>, Vec<F>)>> {
    if terms == 0 || dim == 0 {
        return Err(BsumError::Parameter("instance dimensions must be positive".into()));
    }
    let mut rng = stream(seed, "fermat-weber");
    Ok((0..terms)
        .map(|_| {
            let omega: F = rng::uniform(&mut rng, 0.5, 2.0);
            let p = rng::gaussian_vec::<F>(&mut rng, dim);
            (DenseMatrix::from_fn(dim, dim, |i, j| if i == j { omega } else { F::zero() }), linalg::scale(&p, -omega))
        })
        .collect())
}

/// Random PSD `G^T G` with `G` of size `rank x n`.
pub fn psd_matrix<F: Scalar>(n: usize, rank: usize, seed: u64) -> DenseMatrix<F> {
    let mut rng = stream(seed, "psd");
    gaussian_matrix::<F>(&mut rng, rank, n).gram()
}

/// Two-block quadratic instance `(Q, c, partition, x_true)`.
///
/// `Q = [[S + B Q22^{-1} B^T, B], [B^T, Q22]]` with `S` a weighted path
/// Laplacian and `B^T 1 = 0`, so the first diagonal block is singular
/// (`lambda_min = 0`) while `Q22` is positive definite. `c = -2 Q x_true`
/// makes `x_true` a minimizer.
pub fn two_block_quadratic<F: Scalar>(n1: usize, n2: usize, seed: u64) -> Result<(DenseMatrix<F>, Vec<F>, BlockPartition, Vec<F>)> {
    if n1 < 2 || n2 == 0 {
        return Err(BsumError::Parameter("two-block quadratic needs n1 >= 2 and n2 >= 1".into()));
    }
    let mut rng = stream(seed, "two-block-quadratic");
    let n = n1 + n2;
    let mut s = DenseMatrix::zeros(n1, n1);
    for i in 0..n1 - 1 {
        let w: F = rng::uniform(&mut rng, 0.5, 1.5);
        s.set(i, i, s.get(i, i) + w);
        s.set(i + 1, i + 1, s.get(i + 1, i + 1) + w);
        s.set(i, i + 1, -w);
        s.set(i + 1, i, -w);
    }
    let mut b = gaussian_matrix::<F>(&mut rng, n1, n2).map(|v| v * F::of(0.3));
    for j in 0..n2 {
        let mean = (0..n1).map(|i| b.get(i, j)).sum::<F>() / F::of_usize(n1);
        for i in 0..n1 {
            b.set(i, j, b.get(i, j) - mean);
        }
    }
    let g = gaussian_matrix::<F>(&mut rng, n2, n2);
    let gram = g.gram();
    let q22 = DenseMatrix::from_fn(n2, n2, |i, j| gram.get(i, j) / F::of_usize(n2) + if i == j { F::one() } else { F::zero() });
    let eig = SymmetricEigen::new(&q22)?;
    // B Q22^{-1} B^T column by column.
    let mut binv = DenseMatrix::zeros(n1, n2);
    for i in 0..n1 {
        let row = eig.pinv_solve(b.row(i), F::zero());
        for j in 0..n2 {
            binv.set(i, j, row[j]);
        }
    }
    let coupling = binv.matmul(&b.transpose())?;
    let mut q = DenseMatrix::zeros(n, n);
    for i in 0..n1 {
        for j in 0..n1 {
            let v = s.get(i, j) + F::half() * (coupling.get(i, j) + coupling.get(j, i));
            q.set(i, j, v);
        }
        for j in 0..n2 {
            q.set(i, n1 + j, b.get(i, j));
            q.set(n1 + j, i, b.get(i, j));
        }
    }
    for i in 0..n2 {
        for j in 0..n2 {
            q.set(n1 + i, n1 + j, q22.get(i, j));
        }
    }
    let x_true = rng::gaussian_vec::<F>(&mut rng, n);
    let c = linalg::scale(&q.matvec(&x_true), -F::two());
    Ok((q, c, BlockPartition::new(&[n1, n2])?, x_true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let (a1, b1) = lasso_instance::<f64>(5, 7, 0.5, 11).unwrap();
        let (a2, b2) = lasso_instance::<f64>(5, 7, 0.5, 11).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        let (a3, _) = lasso_instance::<f64>(5, 7, 0.5, 12).unwrap();
        assert_ne!(a1, a3);
    }

    #[test]
    fn group_blocks_rank_deficient() {
        let (blocks, _) = group_lasso_instance::<f64>(10, 3, 4, 2, 1).unwrap();
        for a in &blocks {
            let e = SymmetricEigen::new(&a.gram()).unwrap();
            assert_eq!(e.rank(1e-10), 2);
        }
    }

    #[test]
    fn two_block_structure() {
        let (q, _, part, _) = two_block_quadratic::<f64>(12, 3, 4).unwrap();
        let q11 = q.sub_block(part.range(0), part.range(0));
        let e11 = SymmetricEigen::new(&q11).unwrap();
        assert!(e11.min_value().abs() < 1e-10);
        let q22 = q.sub_block(part.range(1), part.range(1));
        assert!(SymmetricEigen::new(&q22).unwrap().min_value() >= 1.0 - 1e-12);
        assert!(SymmetricEigen::new(&q).unwrap().min_value() > -1e-10);
    }
}
