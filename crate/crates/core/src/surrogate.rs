//! Block upper-bound functions `u_k(v_k; x)`, their minimizers and sampled
//! assumption validators.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BsumError, Result};
use crate::linalg::{self, norm};
use crate::problem::{ConstraintSet, Problem, Regularizer};
use crate::rng::{self, SeededRng};
use crate::scalar::Scalar;

/// How block `k` is majorized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BlockSurrogate<F> {
    /// `u_k = g` (block coordinate minimization).
    Exact,
    /// `g(x) + <grad_k g(x), v - x_k> + step/2 ||v - x_k||^2`.
    ProxLinear { step: F },
    /// Model-supplied bound, see [`CustomSurrogate`].
    Custom,
}

/// Declared constants of one block surrogate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockConstants<F> {
    /// `gamma_k`, strong convexity modulus in `v_k`.
    pub gamma: F,
    /// `L_k`, Lipschitz constant of `grad_{v_k} u_k` in `v_k`.
    pub lipschitz: F,
    /// `G_k`, Lipschitz constant of `grad_{v_k} u_k` in the anchor.
    pub anchor_lipschitz: F,
}

/// A model-specific surrogate (e.g. the AM-GM bound used by IRLS).
pub trait CustomSurrogate<F: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, k: usize, v_k: &[F], anchor: &[F]) -> F;

    /// `argmin_{v in X_k} u_k(v; anchor) + h_k(v) [+ rho/2 ||v - anchor_k||^2]`.
    fn argmin(
        &self,
        k: usize,
        anchor: &[F],
        h: &Regularizer<F>,
        set: &ConstraintSet<F>,
        proximal: Option<F>,
    ) -> Result<Vec<F>>;

    fn constants(&self, k: usize) -> BlockConstants<F>;
}

#[derive(Clone)]
pub struct Surrogate<F: Scalar> {
    blocks: Vec<BlockSurrogate<F>>,
    constants: Vec<BlockConstants<F>>,
    custom: Option<Arc<dyn CustomSurrogate<F>>>,
}

impl<F: Scalar> fmt::Debug for Surrogate<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Surrogate")
            .field("blocks", &self.blocks)
            .field("constants", &self.constants)
            .field("custom", &self.custom.as_ref().map(|c| c.name().to_string()))
            .finish()
    }
}

impl<F: Scalar> Surrogate<F> {
    /// Exact block minimization. `gamma_k` is the block strong convexity
    /// modulus (0 without BSC), `L_k = M_k`, `G_k = M`.
    pub fn exact(p: &Problem<F>) -> Self {
        Self::mixed(p, vec![BlockSurrogate::Exact; p.num_blocks()]).expect("exact surrogate has no parameters")
    }

    /// Prox-linear surrogate with `L_k = M_k`.
    pub fn prox_linear(p: &Problem<F>) -> Self {
        let g = p.smooth();
        let blocks = (0..p.num_blocks()).map(|k| BlockSurrogate::ProxLinear { step: g.block_lipschitz(k) }).collect();
        Self::mixed(p, blocks).expect("declared block Lipschitz constants are positive")
    }

    pub fn prox_linear_with_steps(p: &Problem<F>, steps: &[F]) -> Result<Self> {
        if steps.len() != p.num_blocks() {
            return Err(BsumError::Dimension(format!("{} steps for {} blocks", steps.len(), p.num_blocks())));
        }
        Self::mixed(p, steps.iter().map(|&step| BlockSurrogate::ProxLinear { step }).collect())
    }

    /// Per-block choice of exact or prox-linear surrogates.
    pub fn mixed(p: &Problem<F>, blocks: Vec<BlockSurrogate<F>>) -> Result<Self> {
        if blocks.len() != p.num_blocks() {
            return Err(BsumError::Dimension(format!("{} block surrogates for {} blocks", blocks.len(), p.num_blocks())));
        }
        let g = p.smooth();
        let m = g.lipschitz();
        let mut constants = Vec::with_capacity(blocks.len());
        for (k, b) in blocks.iter().enumerate() {
            let c = match b {
                BlockSurrogate::Exact => BlockConstants {
                    gamma: g.block_strong_convexity(k).unwrap_or(F::zero()),
                    lipschitz: g.block_lipschitz(k),
                    anchor_lipschitz: m,
                },
                BlockSurrogate::ProxLinear { step } => {
                    if !(*step > F::zero()) || !step.is_finite() {
                        return Err(BsumError::Parameter(format!("prox-linear step for block {k} must be positive")));
                    }
                    BlockConstants { gamma: *step, lipschitz: *step, anchor_lipschitz: m + *step }
                }
                BlockSurrogate::Custom => {
                    return Err(BsumError::Unsupported("custom blocks require Surrogate::custom".into()));
                }
            };
            constants.push(c);
        }
        Ok(Self { blocks, constants, custom: None })
    }

    /// Model-supplied surrogate on every block.
    pub fn custom(p: &Problem<F>, bound: Arc<dyn CustomSurrogate<F>>) -> Self {
        let k = p.num_blocks();
        let constants = (0..k).map(|i| bound.constants(i)).collect();
        Self { blocks: vec![BlockSurrogate::Custom; k], constants, custom: Some(bound) }
    }

    /// Overrides declared constants for block `k` (e.g. a user-declared `G_k`).
    pub fn with_constants(mut self, k: usize, c: BlockConstants<F>) -> Self {
        self.constants[k] = c;
        self
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, k: usize) -> &BlockSurrogate<F> {
        &self.blocks[k]
    }

    pub fn blocks(&self) -> &[BlockSurrogate<F>] {
        &self.blocks
    }

    pub fn constants(&self, k: usize) -> &BlockConstants<F> {
        &self.constants[k]
    }

    pub fn custom_bound(&self) -> Option<&Arc<dyn CustomSurrogate<F>>> {
        self.custom.as_ref()
    }

    /// `gamma = 1/2 min_k gamma_k`.
    pub fn gamma(&self) -> F {
        let min = self.constants.iter().map(|c| c.gamma).fold(F::infinity(), F::min);
        F::half() * min
    }

    pub fn lipschitz_max(&self) -> F {
        self.constants.iter().map(|c| c.lipschitz).fold(F::zero(), F::max)
    }

    pub fn anchor_lipschitz_max(&self) -> F {
        self.constants.iter().map(|c| c.anchor_lipschitz).fold(F::zero(), F::max)
    }

    pub fn is_exact(&self) -> bool {
        self.blocks.iter().all(|b| matches!(b, BlockSurrogate::Exact))
    }

    pub fn is_prox_linear(&self) -> bool {
        self.blocks.iter().all(|b| matches!(b, BlockSurrogate::ProxLinear { .. }))
    }

    pub fn label(&self) -> String {
        if self.is_exact() {
            "exact".into()
        } else if self.is_prox_linear() {
            "prox-linear".into()
        } else if let Some(c) = &self.custom {
            c.name().to_string()
        } else {
            let parts: Vec<&str> = self
                .blocks
                .iter()
                .map(|b| match b {
                    BlockSurrogate::Exact => "exact",
                    BlockSurrogate::ProxLinear { .. } => "prox-linear",
                    BlockSurrogate::Custom => "custom",
                })
                .collect();
            format!("mixed({})", parts.join(","))
        }
    }
}

fn soft<F: Scalar>(v: F, t: F) -> F {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        F::zero()
    }
}

fn clip_to<F: Scalar>(set: &ConstraintSet<F>, v: Vec<F>) -> Vec<F> {
    set.project(&v)
}

/// `argmin_u h(u) + I_X(u) + beta/2 ||v - u||^2`.
pub fn prox_block<F: Scalar>(h: &Regularizer<F>, set: &ConstraintSet<F>, beta: F, v: &[F]) -> Result<Vec<F>> {
    if !(beta > F::zero()) {
        return Err(BsumError::Parameter("prox parameter beta must be positive".into()));
    }
    let separable_set = matches!(set, ConstraintSet::Free | ConstraintSet::Box { .. } | ConstraintSet::NonNegative) || v.len() == 1;
    match h {
        Regularizer::Zero | Regularizer::Indicator => Ok(set.project(v)),
        Regularizer::L1 { weight } => {
            if !separable_set {
                return Err(BsumError::Unsupported("l1 prox over a multi-dimensional ball".into()));
            }
            let t = *weight / beta;
            Ok(clip_to(set, v.iter().map(|&x| soft(x, t)).collect()))
        }
        Regularizer::GroupL2 { weight } => {
            let shrink = |v: &[F]| {
                let nv = norm(v);
                let s = if nv > F::zero() { (F::one() - *weight / (beta * nv)).max(F::zero()) } else { F::zero() };
                linalg::scale(v, s)
            };
            match set {
                ConstraintSet::Free => Ok(shrink(v)),
                ConstraintSet::Ball { center, .. } if center.iter().all(|&c| c == F::zero()) => Ok(set.project(&shrink(v))),
                _ if v.len() == 1 => Ok(clip_to(set, vec![soft(v[0], *weight / beta)])),
                _ => Err(BsumError::Unsupported("group-l2 prox over this constraint set".into())),
            }
        }
    }
}

/// `u_k(v_k; anchor)`.
pub fn surrogate_value<F: Scalar>(s: &Surrogate<F>, p: &Problem<F>, k: usize, v_k: &[F], anchor: &[F]) -> F {
    let part = p.partition();
    match s.block(k) {
        BlockSurrogate::Exact => p.smooth_value(&part.with_block(anchor, k, v_k)),
        BlockSurrogate::ProxLinear { step } => {
            let g0 = p.smooth_value(anchor);
            let grad = p.smooth().block_gradient(k, anchor);
            let d = linalg::sub(v_k, part.block(anchor, k));
            g0 + linalg::dot(&grad, &d) + F::half() * *step * linalg::norm_sq(&d)
        }
        BlockSurrogate::Custom => s.custom.as_ref().expect("custom surrogate registered").value(k, v_k, anchor),
    }
}

fn argmin_impl<F: Scalar>(s: &Surrogate<F>, p: &Problem<F>, k: usize, anchor: &[F], proximal: Option<F>) -> Result<Vec<F>> {
    p.partition().check_index(k)?;
    p.partition().check_len(anchor.len())?;
    let h = p.nonsmooth(k);
    let set = p.constraint(k);
    let a_k = p.partition().block(anchor, k);
    match s.block(k) {
        BlockSurrogate::Exact => {
            let solver = p
                .smooth()
                .exact_solver()
                .ok_or_else(|| BsumError::Unsupported(format!("model '{}' has no exact block solver", p.smooth().name())))?;
            solver.minimize_block(k, anchor, h, set, proximal.map(|rho| (rho, a_k)))
        }
        BlockSurrogate::ProxLinear { step } => {
            let beta = *step + proximal.unwrap_or(F::zero());
            let grad = p.smooth().block_gradient(k, anchor);
            let v: Vec<F> = a_k.iter().zip(&grad).map(|(&x, &gi)| x - gi / beta).collect();
            prox_block(h, set, beta, &v)
        }
        BlockSurrogate::Custom => s.custom.as_ref().expect("custom surrogate registered").argmin(k, anchor, h, set, proximal),
    }
}

/// `argmin_{x_k in X_k} u_k(x_k; anchor) + h_k(x_k)`.
pub fn surrogate_argmin<F: Scalar>(s: &Surrogate<F>, p: &Problem<F>, k: usize, anchor: &[F]) -> Result<Vec<F>> {
    argmin_impl(s, p, k, anchor, None)
}

/// Minimizer of `u_k(x_k; anchor) + h_k(x_k) + gamma/2 ||x_k - anchor_k||^2`,
/// the proximal auxiliary point used by the single-block rate argument.
pub fn surrogate_argmin_proximal<F: Scalar>(s: &Surrogate<F>, p: &Problem<F>, k: usize, anchor: &[F], gamma: F) -> Result<Vec<F>> {
    if !(gamma > F::zero()) {
        return Err(BsumError::Parameter("proximal weight must be positive".into()));
    }
    argmin_impl(s, p, k, anchor, Some(gamma))
}

/// Central finite-difference gradient of `v_k -> u_k(v_k; anchor)`.
pub fn surrogate_gradient_fd<F: Scalar>(s: &Surrogate<F>, p: &Problem<F>, k: usize, v_k: &[F], anchor: &[F]) -> Vec<F> {
    let step = F::of(1e-6) * (F::one() + norm(anchor));
    let mut v = v_k.to_vec();
    let mut out = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let orig = v[i];
        v[i] = orig + step;
        let fp = surrogate_value(s, p, k, &v, anchor);
        v[i] = orig - step;
        let fm = surrogate_value(s, p, k, &v, anchor);
        v[i] = orig;
        out.push((fp - fm) / (step + step));
    }
    out
}

/// Seeded feasible sample for one block.
pub fn sample_block<F: Scalar>(set: &ConstraintSet<F>, n: usize, scale: f64, rng: &mut SeededRng) -> Vec<F> {
    match set {
        ConstraintSet::Free => linalg::scale(&rng::gaussian_vec(rng, n), F::of(scale)),
        ConstraintSet::NonNegative => rng::gaussian_vec::<F>(rng, n).into_iter().map(|v| v.abs() * F::of(scale)).collect(),
        ConstraintSet::Box { lo, hi } => lo
            .iter()
            .zip(hi)
            .map(|(&l, &h)| {
                let l = if l.is_finite() { l } else { F::of(-scale) };
                let h = if h.is_finite() { h } else { F::of(scale) };
                l + (h - l) * rng::uniform::<F>(rng, 0.0, 1.0)
            })
            .collect(),
        ConstraintSet::Ball { center, radius } => {
            let dir = rng::unit_direction::<F>(rng, n);
            let t: F = rng::uniform(rng, 0.0, 1.0);
            center.iter().zip(&dir).map(|(&c, &d)| c + *radius * t * d).collect()
        }
    }
}

/// Seeded feasible sample of the whole variable.
pub fn sample_point<F: Scalar>(p: &Problem<F>, scale: f64, rng: &mut SeededRng) -> Vec<F> {
    let mut x = Vec::with_capacity(p.dim());
    for k in 0..p.num_blocks() {
        x.extend(sample_block(p.constraint(k), p.partition().size(k), scale, rng));
    }
    x
}

/// Maximum sampled violations of tightness, domination and gradient consistency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport<F> {
    pub tightness: F,
    pub domination: F,
    pub gradient_mismatch: F,
    pub samples: usize,
}

pub fn validate_assumption_b<F: Scalar>(
    s: &Surrogate<F>,
    p: &Problem<F>,
    samples: usize,
    seed: u64,
) -> Result<AssumptionReport<F>> {
    if samples == 0 {
        return Err(BsumError::Parameter("sample count must be at least 1".into()));
    }
    let mut rng = rng::seeded(rng::derive_seed(seed, "assumption-b"));
    let part = p.partition();
    let mut rep = AssumptionReport { tightness: F::zero(), domination: F::zero(), gradient_mismatch: F::zero(), samples };
    for _ in 0..samples {
        let x = sample_point(p, 1.0, &mut rng);
        let gx = p.smooth_value(&x);
        for k in 0..p.num_blocks() {
            let x_k = part.block(&x, k);
            let u_anchor = surrogate_value(s, p, k, x_k, &x);
            rep.tightness = rep.tightness.max((gx - u_anchor).abs());

            let v_k = sample_block(p.constraint(k), part.size(k), 1.0, &mut rng);
            let g_v = p.smooth_value(&part.with_block(&x, k, &v_k));
            let u_v = surrogate_value(s, p, k, &v_k, &x);
            rep.domination = rep.domination.max(g_v - u_v);

            let fd = surrogate_gradient_fd(s, p, k, x_k, &x);
            let grad = p.smooth().block_gradient(k, &x);
            rep.gradient_mismatch = rep.gradient_mismatch.max(linalg::dist(&fd, &grad));
        }
    }
    Ok(rep)
}

/// For a single-block problem: `max [||grad g(v) - grad g(x)|| - L ||v - x||]`
/// over sampled pairs, with `L` the surrogate's declared constant.
pub fn validate_single_block_lipschitz<F: Scalar>(s: &Surrogate<F>, p: &Problem<F>, samples: usize, seed: u64) -> Result<F> {
    if p.num_blocks() != 1 {
        return Err(BsumError::Unsupported("single-block check on a multi-block problem".into()));
    }
    let l = s.constants(0).lipschitz;
    let mut rng = rng::seeded(rng::derive_seed(seed, "single-block-lipschitz"));
    let mut worst = F::neg_infinity();
    for _ in 0..samples {
        let x = sample_point(p, 1.0, &mut rng);
        let v = sample_point(p, 1.0, &mut rng);
        let gd = linalg::dist(&p.gradient(&v), &p.gradient(&x));
        worst = worst.max(gd - l * linalg::dist(&v, &x));
    }
    Ok(worst)
}
