//! Rate-certificate constants and their estimation from a trace.

use serde::{Deserialize, Serialize};

use crate::engine::Trace;
use crate::error::{BsumError, Result};
use crate::linalg::{self, norm};
use crate::models::{CompositeStructure, SvmData};
use crate::problem::{ConstraintSet, Problem};
use crate::rng;
use crate::scalar::Scalar;
use crate::surrogate::Surrogate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Taken from a model or surrogate declaration.
    Declared,
    /// A provable upper bound computed from the problem data.
    ComputedExact,
    /// Maximum over sampled points; may understate the true supremum.
    SampledBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tagged<F> {
    pub value: F,
    pub provenance: Provenance,
}

impl<F> Tagged<F> {
    pub fn declared(value: F) -> Self {
        Self { value, provenance: Provenance::Declared }
    }

    pub fn exact(value: F) -> Self {
        Self { value, provenance: Provenance::ComputedExact }
    }

    pub fn sampled(value: F) -> Self {
        Self { value, provenance: Provenance::SampledBound }
    }
}

/// Constants of the composite structure entering `sigma_7`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeConstants<F> {
    pub eta_min: F,
    /// `max_{i,k} ||A^i_k (A^i_k)^T|| (P^i_k)^2`.
    pub coupling_max: F,
    pub terms: usize,
}

/// Constants of the L2-SVM structure entering `sigma_8`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmConstants<F> {
    /// `sum_k max_i ||a_{i,k}||`.
    pub block_norm_sum: F,
    pub rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate<F> {
    pub gamma: Tagged<F>,
    pub l_max: Tagged<F>,
    pub g_max: Tagged<F>,
    pub m: Tagged<F>,
    pub m_max: Tagged<F>,
    pub r: Tagged<F>,
    pub q_grad: Tagged<F>,
    pub l_h: Tagged<F>,
    /// Selection constant of G-So (1 for MBI).
    pub q: Option<f64>,
    pub period: usize,
    pub blocks: usize,
    pub f_star: F,
    /// `f(x^1)`.
    pub f_first: F,
    /// `L` of a single-block surrogate.
    pub sum_lipschitz: Option<Tagged<F>>,
    pub composite: Option<CompositeConstants<F>>,
    pub svm: Option<SvmConstants<F>>,
}

impl<F: Scalar> RateCertificate<F> {
    pub fn with_composite(mut self, c: &CompositeStructure<F>) -> Self {
        self.composite = Some(CompositeConstants { eta_min: c.eta_min(), coupling_max: c.coupling_max(), terms: c.terms });
        self
    }

    pub fn with_svm(mut self, d: &SvmData<F>) -> Self {
        self.svm = Some(SvmConstants { block_norm_sum: d.block_norm_sum(), rows: d.num_rows() });
        self
    }

    /// Whether `R` or `Q` only has sampled provenance.
    pub fn has_sampled_bounds(&self) -> bool {
        self.r.provenance == Provenance::SampledBound || self.q_grad.provenance == Provenance::SampledBound
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self { samples: 1000, seed: 0 }
    }
}

/// Per-coordinate exact bound on `||x - x*||` over a bounded block set.
fn block_distance_bound<F: Scalar>(set: &ConstraintSet<F>, center: &[F]) -> Option<F> {
    match set {
        ConstraintSet::Box { lo, hi } => {
            if lo.iter().chain(hi).any(|v| !v.is_finite()) {
                return None;
            }
            let sq: F = center
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&c, (&l, &h))| {
                    let d = (c - l).abs().max((h - c).abs());
                    d * d
                })
                .sum();
            Some(sq.sqrt())
        }
        ConstraintSet::Ball { center: c0, radius } => Some(linalg::dist(center, c0) + *radius),
        ConstraintSet::Free | ConstraintSet::NonNegative => None,
    }
}

/// Largest `t` with `f(x* + t d) <= level` along a ray, by doubling and bisection.
fn ray_extent<F: Scalar>(p: &Problem<F>, x_star: &[F], d: &[F], level: F, start: F) -> Option<F> {
    let at = |t: F| -> Vec<F> { x_star.iter().zip(d).map(|(&x, &di)| x + t * di).collect() };
    let mut lo = F::zero();
    let mut hi = start.max(F::of(1e-3));
    let mut doublings = 0;
    while p.objective(&at(hi)) <= level {
        lo = hi;
        hi = hi + hi;
        doublings += 1;
        if doublings > 60 {
            return None;
        }
    }
    for _ in 0..50 {
        let mid = lo + (hi - lo) * F::half();
        if p.objective(&at(mid)) <= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Assembles the certificate for `trace`. `R` is exact for bounded feasible
/// sets and a sampled level-set bound otherwise; `Q` is always sampled.
pub fn estimate_constants<F: Scalar>(
    p: &Problem<F>,
    s: &Surrogate<F>,
    trace: &Trace<F>,
    x_star: Option<&[F]>,
    f_star: Option<F>,
    opts: &EstimateOptions,
) -> Result<RateCertificate<F>> {
    let f_star = f_star.ok_or_else(|| BsumError::Dependency("optimal value f* is required".into()))?;
    let x_star = x_star.ok_or_else(|| BsumError::Dependency("reference minimizer x* is required".into()))?;
    if trace.records.is_empty() {
        return Err(BsumError::InsufficientData("empty trace".into()));
    }
    let f_first = trace.records.get(1).unwrap_or(&trace.records[0]).f;
    let level = f_first.max(f_star);

    let g = p.smooth();
    let mut points: Vec<&[F]> = Vec::new();
    points.extend(trace.iterates.iter().map(Vec::as_slice));
    points.extend(trace.virtual_points.iter().map(Vec::as_slice));
    points.extend(trace.auxiliary_points.iter().map(Vec::as_slice));
    points.push(x_star);

    let mut r_sampled = points.iter().map(|x| linalg::dist(x, x_star)).fold(F::zero(), F::max);
    let mut q_sampled = points.iter().map(|x| norm(&g.gradient(x))).fold(F::zero(), F::max);

    let mut rng = rng::seeded(rng::derive_seed(opts.seed, "level-set"));
    let start = r_sampled.max(F::one());
    for _ in 0..opts.samples {
        let d = rng::unit_direction::<F>(&mut rng, p.dim());
        if let Some(t) = ray_extent(p, x_star, &d, level, start) {
            r_sampled = r_sampled.max(t);
            for frac in [0.25, 0.5, 0.75, 1.0] {
                let x: Vec<F> = x_star.iter().zip(&d).map(|(&xs, &di)| xs + F::of(frac) * t * di).collect();
                q_sampled = q_sampled.max(norm(&g.gradient(&x)));
            }
        } else {
            r_sampled = F::infinity();
        }
    }

    let part = p.partition();
    let mut exact_sq = Some(F::zero());
    for k in 0..p.num_blocks() {
        exact_sq = match (exact_sq, block_distance_bound(p.constraint(k), part.block(x_star, k))) {
            (Some(acc), Some(b)) => Some(acc + b * b),
            _ => None,
        };
    }
    let r = match exact_sq {
        Some(sq) => Tagged::exact(sq.sqrt()),
        None => Tagged::sampled(r_sampled),
    };
    // A one-dimensional convex g has monotone derivative, so the interval end
    // points of the level set carry the extreme gradient.
    let q_grad = if p.dim() == 1 && exact_sq.is_some() {
        let (lo, hi) = p.constraint(0).interval();
        let gl = g.gradient(&[lo])[0].abs();
        let gh = g.gradient(&[hi])[0].abs();
        Tagged::exact(gl.max(gh))
    } else {
        Tagged::sampled(q_sampled)
    };

    let m_max = (0..p.num_blocks()).map(|k| g.block_lipschitz(k)).fold(F::zero(), F::max);
    Ok(RateCertificate {
        gamma: Tagged::declared(s.gamma()),
        l_max: Tagged::declared(s.lipschitz_max()),
        g_max: Tagged::declared(s.anchor_lipschitz_max()),
        m: Tagged::declared(g.lipschitz()),
        m_max: Tagged::declared(m_max),
        r,
        q_grad,
        l_h: Tagged::declared(p.nonsmooth_lipschitz()),
        q: None,
        period: trace.metadata.period.max(1),
        blocks: p.num_blocks(),
        f_star,
        f_first,
        sum_lipschitz: (p.num_blocks() == 1).then(|| Tagged::declared(s.constants(0).lipschitz)),
        composite: None,
        svm: None,
    }
    .with_selection(trace.metadata.selection_q))
}

impl<F: Scalar> RateCertificate<F> {
    pub fn with_selection(mut self, q: Option<f64>) -> Self {
        self.q = q;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_bsum, RunConfig};
    use crate::linalg::DenseMatrix;
    use crate::models::build_quadratic;
    use crate::problem::BlockPartition;
    use crate::scheduler::Rule;
    use std::sync::Arc;

    #[test]
    fn interval_example() {
        // g = (x - 1)^2 = x^2 - 2x + 1; the constant does not matter.
        let q = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        let p = Arc::new(
            build_quadratic(q, vec![-2.0], BlockPartition::single(1).unwrap(), vec![ConstraintSet::uniform_box(1, -2.0, 2.0)]).unwrap(),
        );
        let s = Surrogate::exact(&p);
        let t = run_bsum(&RunConfig::new(Arc::clone(&p), s.clone(), Rule::GaussSeidel, 2, vec![-2.0])).unwrap();
        let cert = estimate_constants(&p, &s, &t, Some(&[1.0]), Some(-1.0), &EstimateOptions::default()).unwrap();
        assert_eq!(cert.r, Tagged::exact(3.0));
        assert_eq!(cert.q_grad, Tagged::exact(6.0));
    }

    #[test]
    fn trajectory_radius() {
        let q = DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        let p = Arc::new(build_quadratic(q, vec![0.0, 0.0], BlockPartition::scalar(2).unwrap(), vec![ConstraintSet::Free; 2]).unwrap());
        let s = Surrogate::exact(&p);
        let t = run_bsum(&RunConfig::new(Arc::clone(&p), s.clone(), Rule::GaussSeidel, 20, vec![1.0, 1.0])).unwrap();
        let opts = EstimateOptions { samples: 0, seed: 0 };
        let cert = estimate_constants(&p, &s, &t, Some(&[0.0, 0.0]), Some(0.0), &opts).unwrap();
        assert_eq!(cert.r.provenance, Provenance::SampledBound);
        assert!((cert.r.value - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(estimate_constants(&p, &s, &t, Some(&[0.0, 0.0]), None, &opts), Err(BsumError::Dependency(_))));
    }

    #[test]
    fn box_bound_within_diameter() {
        let q = DenseMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let set = ConstraintSet::uniform_box(1, -1.0, 1.0);
        let p = Arc::new(build_quadratic(q, vec![1.0, -1.0], BlockPartition::scalar(2).unwrap(), vec![set.clone(), set]).unwrap());
        let s = Surrogate::exact(&p);
        let t = run_bsum(&RunConfig::new(Arc::clone(&p), s.clone(), Rule::GaussSeidel, 5, vec![1.0, 1.0])).unwrap();
        let x = t.final_iterate().unwrap().to_vec();
        let cert = estimate_constants(&p, &s, &t, Some(&x), Some(p.objective(&x)), &EstimateOptions::default()).unwrap();
        assert_eq!(cert.r.provenance, Provenance::ComputedExact);
        assert!(cert.r.value <= p.feasible_diameter().unwrap() + 1e-15);
    }
}
