//! The BSUM sweep and its specializations: BCM/BCPG, SUM, the accelerated
//! two-block method, and a high-accuracy reference solver.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BsumError, Result};
use crate::linalg;
use crate::problem::Problem;
use crate::scalar::Scalar;
use crate::scheduler::{virtual_updates, Rule, Schedule, VirtualUpdate};
use crate::surrogate::{prox_block, surrogate_argmin, surrogate_argmin_proximal, BlockSurrogate, Surrogate};

/// Optional per-sweep statistics. Each adds oracle calls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Compute `x_hat^{r+1}` every sweep even when the rule does not need it.
    pub record_virtual_steps: bool,
    /// Evaluate `grad g` at every intermediate anchor `w_k^{r+1}`.
    pub record_gradient_differences: bool,
    /// Single-block runs: compute the proximal auxiliary point with `gamma = 4L`.
    pub auxiliary: bool,
    /// Keep every intermediate anchor (instrumentation).
    pub record_anchors: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { record_virtual_steps: false, record_gradient_differences: true, auxiliary: false, record_anchors: false }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig<F: Scalar> {
    pub problem: Arc<Problem<F>>,
    pub surrogate: Surrogate<F>,
    pub rule: Rule,
    pub max_iterations: usize,
    /// Stop once `f(x^r) - f* <= tolerance`; only used when `optimum` is known.
    pub tolerance: F,
    pub optimum: Option<F>,
    pub x0: Vec<F>,
    pub options: RunOptions,
}

impl<F: Scalar> RunConfig<F> {
    pub fn new(problem: Arc<Problem<F>>, surrogate: Surrogate<F>, rule: Rule, max_iterations: usize, x0: Vec<F>) -> Self {
        Self {
            problem,
            surrogate,
            rule,
            max_iterations,
            tolerance: F::zero(),
            optimum: None,
            x0,
            options: RunOptions::default(),
        }
    }

    pub fn with_options(mut self, options: RunOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_optimum(mut self, optimum: F, tolerance: F) -> Self {
        self.optimum = Some(optimum);
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(BsumError::Config("max iterations must be at least 1".into()));
        }
        if !(self.tolerance >= F::zero()) {
            return Err(BsumError::Config("tolerance must be nonnegative".into()));
        }
        if self.surrogate.num_blocks() != self.problem.num_blocks() {
            return Err(BsumError::Config("surrogate and problem disagree on the block count".into()));
        }
        self.problem.partition().check_len(self.x0.len()).map_err(|e| BsumError::Config(e.to_string()))?;
        if !self.problem.is_feasible(&self.x0) {
            return Err(BsumError::Config("initial point is infeasible".into()));
        }
        self.rule.validate(self.problem.num_blocks()).map_err(|e| BsumError::Config(e.to_string()))
    }
}

/// Statistics of iterate `x^r` and the sweep `x^r -> x^{r+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord<F> {
    pub r: usize,
    /// `f(x^r)`.
    pub f: F,
    /// `f(x^r) - f*`, once an optimum is attached.
    pub delta: Option<F>,
    /// `||x^r - x^{r+1}||^2`.
    pub step_sq: Option<F>,
    /// `||x^r - x_hat^{r+1}||^2`.
    pub virt_step_sq: Option<F>,
    /// `sum_k ||grad g(w_k^{r+1}) - grad g(w_{k+1}^{r+1})||^2`.
    pub grad_diff_sq: Option<F>,
    /// `||x^r - x_tilde^{r+1}||^2` (single-block auxiliary point).
    pub aux_step_sq: Option<F>,
    /// `C^{r+1}`, in processing order.
    pub blocks: Vec<usize>,
    /// `f(x^r) - f(x^{r+1}) - sum_{k in C} gamma_k/2 ||x_k^r - x_k^{r+1}||^2`.
    pub descent_slack: Option<F>,
}

impl<F: Scalar> IterationRecord<F> {
    pub fn terminal(r: usize, f: F) -> Self {
        Self {
            r,
            f,
            delta: None,
            step_sq: None,
            virt_step_sq: None,
            grad_diff_sq: None,
            aux_step_sq: None,
            blocks: Vec::new(),
            descent_slack: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub method: String,
    pub rule: String,
    pub surrogate: String,
    pub model: String,
    pub blocks: usize,
    pub period: usize,
    pub selection_q: Option<f64>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace<F> {
    pub metadata: TraceMetadata,
    pub records: Vec<IterationRecord<F>>,
    /// `x^r` for every record.
    pub iterates: Vec<Vec<F>>,
    /// `x_hat^{r+1}` per sweep, when computed.
    pub virtual_points: Vec<Vec<F>>,
    /// `x_tilde^{r+1}` per sweep, when computed.
    pub auxiliary_points: Vec<Vec<F>>,
    /// Intermediate anchors `(k, w_k^{r+1})` per sweep, when recorded.
    pub anchors: Vec<Vec<(usize, Vec<F>)>>,
    pub optimum: Option<F>,
}

impl<F: Scalar> Trace<F> {
    pub fn new(metadata: TraceMetadata) -> Self {
        Self {
            metadata,
            records: Vec::new(),
            iterates: Vec::new(),
            virtual_points: Vec::new(),
            auxiliary_points: Vec::new(),
            anchors: Vec::new(),
            optimum: None,
        }
    }

    /// Sets `Delta^r = f(x^r) - f*` on every record.
    pub fn attach_optimum(&mut self, f_star: F) {
        self.optimum = Some(f_star);
        for rec in &mut self.records {
            rec.delta = Some(rec.f - f_star);
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_objective(&self) -> F {
        self.records.last().map(|r| r.f).unwrap_or_else(F::nan)
    }

    pub fn final_iterate(&self) -> Option<&[F]> {
        self.iterates.last().map(Vec::as_slice)
    }

    pub fn min_objective(&self) -> F {
        self.records.iter().map(|r| r.f).fold(F::infinity(), F::min)
    }

    pub fn deltas(&self) -> Vec<Option<F>> {
        self.records.iter().map(|r| r.delta).collect()
    }
}

/// Result of one sweep.
#[derive(Clone, Debug)]
pub struct SweepOutcome<F> {
    pub next: Vec<F>,
    pub record: IterationRecord<F>,
    pub virtual_update: Option<VirtualUpdate<F>>,
    pub auxiliary: Option<Vec<F>>,
    pub anchors: Vec<(usize, Vec<F>)>,
    pub f_next: F,
}

/// One BSUM iteration from `x^r`.
pub fn bsum_sweep<F: Scalar>(
    p: &Problem<F>,
    s: &Surrogate<F>,
    sch: &mut Schedule,
    x: &[F],
    r: usize,
    opts: &RunOptions,
) -> Result<SweepOutcome<F>> {
    let part = p.partition();
    part.check_len(x.len())?;
    let f_r = p.objective(x);
    let vu = if sch.rule().needs_virtual_update() || opts.record_virtual_steps { Some(virtual_updates(p, s, x)?) } else { None };
    let blocks = sch.select_blocks(r, vu.as_ref())?;

    let auxiliary = if opts.auxiliary && p.num_blocks() == 1 {
        let gamma = F::of(4.0) * s.constants(0).lipschitz;
        Some(surrogate_argmin_proximal(s, p, 0, x, gamma)?)
    } else {
        None
    };

    let mut w = x.to_vec();
    let mut grad_prev = opts.record_gradient_differences.then(|| p.gradient(&w));
    let mut grad_diff = F::zero();
    let mut anchors = Vec::new();
    let mut weighted_steps = F::zero();
    for (i, &k) in blocks.iter().enumerate() {
        let new_k = match (&vu, i) {
            // The first processed block is anchored at x^r, where its Jacobi candidate was formed.
            (Some(v), 0) => part.block(&v.candidate, k).to_vec(),
            _ => surrogate_argmin(s, p, k, &w)?,
        };
        if opts.record_anchors {
            anchors.push((k, w.clone()));
        }
        let step = linalg::dist_sq(&new_k, part.block(&w, k));
        weighted_steps += s.constants(k).gamma * F::half() * step;
        part.block_mut(&mut w, k).copy_from_slice(&new_k);
        if let Some(gp) = grad_prev.as_mut() {
            let gn = p.gradient(&w);
            grad_diff += linalg::dist_sq(&gn, gp);
            *gp = gn;
        }
    }
    let f_next = p.objective(&w);
    let record = IterationRecord {
        r,
        f: f_r,
        delta: None,
        step_sq: Some(linalg::dist_sq(x, &w)),
        virt_step_sq: vu.as_ref().map(VirtualUpdate::step_sq),
        grad_diff_sq: grad_prev.map(|_| grad_diff),
        aux_step_sq: auxiliary.as_ref().map(|a| linalg::dist_sq(x, a)),
        blocks,
        descent_slack: Some(f_r - f_next - weighted_steps),
    };
    Ok(SweepOutcome { next: w, record, virtual_update: vu, auxiliary, anchors, f_next })
}

fn method_label<F: Scalar>(s: &Surrogate<F>, k: usize) -> String {
    if k == 1 {
        "sum".into()
    } else if s.is_exact() {
        "bcm".into()
    } else if s.is_prox_linear() {
        "bcpg".into()
    } else {
        "bsum".into()
    }
}

fn metadata_for<F: Scalar>(cfg: &RunConfig<F>, method: String) -> TraceMetadata {
    let mut meta = TraceMetadata {
        method,
        rule: cfg.rule.label(),
        surrogate: cfg.surrogate.label(),
        model: cfg.problem.smooth().name().to_string(),
        blocks: cfg.problem.num_blocks(),
        period: cfg.rule.period(),
        selection_q: cfg.rule.selection_q(),
        warnings: Vec::new(),
        notes: Vec::new(),
    };
    if cfg.rule.needs_virtual_update() || cfg.options.record_virtual_steps {
        meta.notes.push(format!("virtual updates use the run surrogate ({})", meta.surrogate));
    }
    meta
}

/// Runs BSUM until the iteration budget (or the optional gap tolerance).
pub fn run_bsum<F: Scalar>(cfg: &RunConfig<F>) -> Result<Trace<F>> {
    cfg.validate()?;
    let p = cfg.problem.as_ref();
    let mut sch = Schedule::new(cfg.rule.clone(), p.num_blocks())?;
    let mut trace = Trace::new(metadata_for(cfg, method_label(&cfg.surrogate, p.num_blocks())));
    let mut x = cfg.x0.clone();
    let mut r = 0;
    loop {
        let stop = r == cfg.max_iterations
            || cfg.optimum.is_some_and(|fs| p.objective(&x) - fs <= cfg.tolerance);
        if stop {
            trace.records.push(IterationRecord::terminal(r, p.objective(&x)));
            trace.iterates.push(x);
            break;
        }
        let out = bsum_sweep(p, &cfg.surrogate, &mut sch, &x, r, &cfg.options)?;
        trace.records.push(out.record);
        trace.iterates.push(std::mem::replace(&mut x, out.next));
        if let Some(v) = out.virtual_update {
            trace.virtual_points.push(v.candidate);
        }
        if let Some(a) = out.auxiliary {
            trace.auxiliary_points.push(a);
        }
        if cfg.options.record_anchors {
            trace.anchors.push(out.anchors);
        }
        r += 1;
    }
    if let Some(fs) = cfg.optimum {
        trace.attach_optimum(fs);
    }
    Ok(trace)
}

/// Successive upper-bound minimization on a single-block problem.
pub fn run_sum<F: Scalar>(cfg: &RunConfig<F>) -> Result<Trace<F>> {
    if cfg.problem.num_blocks() != 1 {
        return Err(BsumError::Config("SUM needs a single-block partition".into()));
    }
    run_bsum(cfg)
}

/// State of the accelerated two-block method after iteration `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct AccState<F> {
    pub r: usize,
    pub theta: F,
    /// Extrapolated point `v_1^r`.
    pub v1: Vec<F>,
    /// Momentum point `w_1^r`.
    pub w1: Vec<F>,
    pub x1: Vec<F>,
    /// `x_2^r = argmin_{x_2} f(v_1^r, x_2)`.
    pub x2: Vec<F>,
}

/// `theta^r = 2 / (r + 1)`.
pub fn theta<F: Scalar>(r: usize) -> F {
    F::two() / F::of_usize(r + 1)
}

struct TwoBlock<'a, F: Scalar> {
    p: &'a Problem<F>,
    m1: F,
}

impl<'a, F: Scalar> TwoBlock<'a, F> {
    fn new(p: &'a Problem<F>, s: &Surrogate<F>) -> Result<Self> {
        if p.num_blocks() != 2 {
            return Err(BsumError::Unsupported(format!("accelerated two-block method on {} blocks", p.num_blocks())));
        }
        if p.smooth().exact_solver().is_none() {
            return Err(BsumError::Unsupported("accelerated two-block method needs an exact solver for block 2".into()));
        }
        let m1 = match s.block(0) {
            BlockSurrogate::ProxLinear { step } => *step,
            _ => p.smooth().block_lipschitz(0),
        };
        if !(m1 > F::zero()) {
            return Err(BsumError::Parameter("block-1 Lipschitz constant must be positive".into()));
        }
        Ok(Self { p, m1 })
    }

    fn inner(&self, x1: &[F]) -> Result<Vec<F>> {
        let part = self.p.partition();
        let mut anchor = vec![F::zero(); part.dim()];
        part.block_mut(&mut anchor, 0).copy_from_slice(x1);
        self.p.smooth().exact_solver().expect("checked").minimize_block(1, &anchor, self.p.nonsmooth(1), self.p.constraint(1), None)
    }

    fn join(x1: &[F], x2: &[F]) -> Vec<F> {
        let mut x = x1.to_vec();
        x.extend_from_slice(x2);
        x
    }

    /// `(x_1, x_2^*(x_1))`, the point whose objective is the reduced value.
    fn lift(&self, x1: &[F]) -> Result<Vec<F>> {
        Ok(Self::join(x1, &self.inner(x1)?))
    }

    fn step(&self, r: usize, x1_prev: &[F], w1_prev: &[F]) -> Result<AccState<F>> {
        let th: F = theta(r);
        let v1: Vec<F> = x1_prev.iter().zip(w1_prev).map(|(&x, &w)| (F::one() - th) * x + th * w).collect();
        let x2 = self.inner(&v1)?;
        let grad = self.p.smooth().block_gradient(0, &Self::join(&v1, &x2));
        let trial: Vec<F> = v1.iter().zip(&grad).map(|(&v, &g)| v - g / self.m1).collect();
        let x1 = prox_block(self.p.nonsmooth(0), self.p.constraint(0), self.m1, &trial)?;
        let w1 = x1_prev.iter().zip(&x1).map(|(&xp, &xn)| xp + (xn - xp) / th).collect();
        Ok(AccState { r, theta: th, v1, w1, x1, x2 })
    }
}

/// Accelerated two-block BSUM. Block 2 is minimized exactly; block 1 takes a
/// prox-linear step with constant `M_1` at the extrapolated point.
pub fn run_a2bsum<F: Scalar>(cfg: &RunConfig<F>) -> Result<Trace<F>> {
    let tb = TwoBlock::new(cfg.problem.as_ref(), &cfg.surrogate)?;
    cfg.validate()?;
    let p = cfg.problem.as_ref();
    let part = p.partition();
    let mut meta = metadata_for(cfg, "a2bsum".into());
    meta.rule = "a2bsum".into();
    meta.surrogate = "prox-linear/exact".into();
    meta.notes.push("objective values are reduced values f(x1, x2*(x1))".into());
    if p.smooth().exact_solver().and_then(|s| s.unique_minimizer(1)) == Some(false) {
        meta.warnings.push("inner block minimizer is not unique: the inner-uniqueness assumption fails".into());
    }
    let mut trace = Trace::new(meta);

    let mut x1 = part.block(&cfg.x0, 0).to_vec();
    let mut w1 = x1.clone();
    let mut x = tb.lift(&x1)?;
    let mut f = p.objective(&x);
    for r in 1..=cfg.max_iterations {
        if cfg.optimum.is_some_and(|fs| f - fs <= cfg.tolerance) {
            break;
        }
        let st = tb.step(r, &x1, &w1)?;
        let next = tb.lift(&st.x1)?;
        let f_next = p.objective(&next);
        trace.records.push(IterationRecord {
            r: r - 1,
            f,
            delta: None,
            step_sq: Some(linalg::dist_sq(&x, &next)),
            virt_step_sq: None,
            grad_diff_sq: None,
            aux_step_sq: None,
            blocks: vec![1, 0],
            descent_slack: None,
        });
        trace.iterates.push(std::mem::replace(&mut x, next));
        x1 = st.x1;
        w1 = st.w1;
        f = f_next;
    }
    let r_last = trace.records.len();
    trace.records.push(IterationRecord::terminal(r_last, f));
    trace.iterates.push(x);
    if let Some(fs) = cfg.optimum {
        trace.attach_optimum(fs);
    }
    Ok(trace)
}

/// Iteration sequence of the accelerated method (for inspection and tests).
pub fn a2bsum_states<F: Scalar>(p: &Problem<F>, s: &Surrogate<F>, x0: &[F], iterations: usize) -> Result<Vec<AccState<F>>> {
    let tb = TwoBlock::new(p, s)?;
    let mut x1 = p.partition().block(x0, 0).to_vec();
    let mut w1 = x1.clone();
    let mut out = Vec::with_capacity(iterations);
    for r in 1..=iterations {
        let st = tb.step(r, &x1, &w1)?;
        x1 = st.x1.clone();
        w1 = st.w1.clone();
        out.push(st);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSettings {
    pub max_sweeps: usize,
    /// Objective change threshold, relative to `max(1, |f|)`.
    pub tolerance: f64,
    /// Consecutive sweeps below the threshold required to stop.
    pub patience: usize,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        Self { max_sweeps: 200_000, tolerance: 1e-12, patience: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution<F> {
    pub x: Vec<F>,
    pub f: F,
    pub converged: bool,
    /// Last successive objective change.
    pub achieved_change: F,
    pub sweeps: usize,
    pub method: String,
}

pub fn reference_solve<F: Scalar>(p: &Problem<F>) -> Result<ReferenceSolution<F>> {
    reference_solve_with(p, &ReferenceSettings::default())
}

pub fn reference_solve_with<F: Scalar>(p: &Problem<F>, settings: &ReferenceSettings) -> Result<ReferenceSolution<F>> {
    if p.all_smooth() && p.all_free() {
        if let Some(x) = p.smooth().closed_form_minimizer() {
            let f = p.objective(&x);
            return Ok(ReferenceSolution { x, f, converged: true, achieved_change: F::zero(), sweeps: 0, method: "closed-form".into() });
        }
    }
    let x0 = p.project(&vec![F::zero(); p.dim()]);
    let prox = Surrogate::prox_linear(p);
    if p.num_blocks() == 2 && p.smooth().exact_solver().is_some() {
        if let Ok(sol) = reference_accelerated(p, &prox, &x0, settings) {
            return Ok(sol);
        }
    }
    reference_bcpg(p, &prox, &x0, settings)
}

struct Stall<F> {
    tol: F,
    patience: usize,
    quiet: usize,
    last_change: F,
}

impl<F: Scalar> Stall<F> {
    fn new(s: &ReferenceSettings) -> Self {
        Self { tol: F::of(s.tolerance), patience: s.patience, quiet: 0, last_change: F::infinity() }
    }

    fn update(&mut self, f_prev: F, f_next: F) -> bool {
        self.last_change = (f_prev - f_next).abs();
        if self.last_change <= self.tol * F::one().max(f_next.abs()) {
            self.quiet += 1;
        } else {
            self.quiet = 0;
        }
        self.quiet >= self.patience
    }
}

fn reference_bcpg<F: Scalar>(p: &Problem<F>, s: &Surrogate<F>, x0: &[F], settings: &ReferenceSettings) -> Result<ReferenceSolution<F>> {
    let mut sch = Schedule::new(Rule::GaussSeidel, p.num_blocks())?;
    let opts = RunOptions { record_gradient_differences: false, ..RunOptions::default() };
    let mut x = x0.to_vec();
    let mut f = p.objective(&x);
    let mut best = (x.clone(), f);
    let mut stall = Stall::new(settings);
    for sweep in 0..settings.max_sweeps {
        let out = bsum_sweep(p, s, &mut sch, &x, sweep, &opts)?;
        x = out.next;
        let done = stall.update(f, out.f_next);
        f = out.f_next;
        if f < best.1 {
            best = (x.clone(), f);
        }
        if done {
            return Ok(ReferenceSolution { x: best.0, f: best.1, converged: true, achieved_change: stall.last_change, sweeps: sweep + 1, method: "bcpg-gs".into() });
        }
    }
    Ok(ReferenceSolution { x: best.0, f: best.1, converged: false, achieved_change: stall.last_change, sweeps: settings.max_sweeps, method: "bcpg-gs".into() })
}

/// Accelerated two-block iteration with a function-value restart.
fn reference_accelerated<F: Scalar>(p: &Problem<F>, s: &Surrogate<F>, x0: &[F], settings: &ReferenceSettings) -> Result<ReferenceSolution<F>> {
    let tb = TwoBlock::new(p, s)?;
    let mut x1 = p.partition().block(x0, 0).to_vec();
    let mut w1 = x1.clone();
    let mut f = p.objective(&tb.lift(&x1)?);
    let mut best = (tb.lift(&x1)?, f);
    let mut stall = Stall::new(settings);
    let mut local = 1;
    for sweep in 0..settings.max_sweeps {
        let st = tb.step(local, &x1, &w1)?;
        let x = tb.lift(&st.x1)?;
        let f_next = p.objective(&x);
        if f_next > f {
            // restart momentum from the current point
            local = 1;
            w1 = x1.clone();
            continue;
        }
        let done = stall.update(f, f_next);
        x1 = st.x1;
        w1 = st.w1;
        f = f_next;
        local += 1;
        if f < best.1 {
            best = (x, f);
        }
        if done {
            return Ok(ReferenceSolution { x: best.0, f: best.1, converged: true, achieved_change: stall.last_change, sweeps: sweep + 1, method: "a2bsum-restart".into() });
        }
    }
    Ok(ReferenceSolution { x: best.0, f: best.1, converged: false, achieved_change: stall.last_change, sweeps: settings.max_sweeps, method: "a2bsum-restart".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::models::build_quadratic;
    use crate::problem::{BlockPartition, ConstraintSet};

    fn worked() -> Arc<Problem<f64>> {
        let q = DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        Arc::new(build_quadratic(q, vec![0.0, 0.0], BlockPartition::scalar(2).unwrap(), vec![ConstraintSet::Free; 2]).unwrap())
    }

    #[test]
    fn bcm_sweeps_on_worked_example() {
        let p = worked();
        let cfg = RunConfig::new(Arc::clone(&p), Surrogate::exact(&p), Rule::GaussSeidel, 2, vec![1.0, 1.0]);
        let t = run_bsum(&cfg).unwrap();
        assert_eq!(t.iterates[1], vec![1.0, 0.5]);
        assert_eq!(t.iterates[2], vec![0.5, 0.25]);
        assert_eq!(t.records[0].f, 1.0);
        assert_eq!(t.records[1].f, 0.5);
        assert_eq!(t.records[2].f, 0.125);
        assert_eq!(t.records[2].step_sq, None);
    }

    #[test]
    fn bcm_geometric_gap() {
        let p = worked();
        let cfg = RunConfig::new(Arc::clone(&p), Surrogate::exact(&p), Rule::GaussSeidel, 10, vec![1.0, 1.0]).with_optimum(0.0, 0.0);
        let t = run_bsum(&cfg).unwrap();
        for r in 1..t.len() {
            let expected = 2f64.powi(-2 * r as i32 + 1);
            assert!((t.records[r].delta.unwrap() - expected).abs() <= 1e-15 * expected.max(1e-300));
        }
    }

    #[test]
    fn empty_slot_is_noop() {
        let p = worked();
        let rule = Rule::EssentiallyCyclic { period_map: vec![vec![], vec![0, 1]] };
        let cfg = RunConfig::new(Arc::clone(&p), Surrogate::exact(&p), rule, 2, vec![1.0, 1.0]);
        let t = run_bsum(&cfg).unwrap();
        assert_eq!(t.iterates[1], vec![1.0, 1.0]);
        assert_eq!(t.records[0].step_sq, Some(0.0));
        assert!(t.records[0].blocks.is_empty());
    }

    #[test]
    fn anchors_contain_updated_blocks() {
        let p = worked();
        let opts = RunOptions { record_anchors: true, ..RunOptions::default() };
        let cfg = RunConfig::new(Arc::clone(&p), Surrogate::prox_linear(&p), Rule::GaussSeidel, 3, vec![1.0, -2.0]).with_options(opts);
        let t = run_bsum(&cfg).unwrap();
        for (r, sweep) in t.anchors.iter().enumerate() {
            let (x, xn) = (&t.iterates[r], &t.iterates[r + 1]);
            assert_eq!(sweep[0], (0, x.clone()));
            assert_eq!(sweep[1], (1, vec![xn[0], x[1]]));
        }
    }

    #[test]
    fn sum_rejects_multiblock_and_matches_bsum() {
        let p = worked();
        let cfg = RunConfig::new(Arc::clone(&p), Surrogate::exact(&p), Rule::GaussSeidel, 3, vec![1.0, 1.0]);
        assert!(matches!(run_sum(&cfg), Err(BsumError::Config(_))));

        let q = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        let p1 = Arc::new(build_quadratic(q, vec![0.0], BlockPartition::single(1).unwrap(), vec![ConstraintSet::Free]).unwrap());
        let s = Surrogate::prox_linear_with_steps(&p1, &[2.0]).unwrap();
        let cfg = RunConfig::new(Arc::clone(&p1), s, Rule::GaussSeidel, 4, vec![1.0]);
        let a = run_sum(&cfg).unwrap();
        let b = run_bsum(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.iterates[1], vec![0.0]);
    }

    #[test]
    fn theta_schedule() {
        assert_eq!(theta::<f64>(1), 1.0);
        assert!((theta::<f64>(2) - 2.0 / 3.0).abs() < 1e-16);
        assert_eq!(theta::<f64>(3), 0.5);
        let p = worked();
        let states = a2bsum_states(&p, &Surrogate::prox_linear(&p), &[1.0, 1.0], 3).unwrap();
        assert_eq!(states[0].w1, states[0].x1);
        assert_eq!(states[0].v1, vec![1.0]);
    }

    #[test]
    fn a2bsum_rejects_other_block_counts() {
        let q = DenseMatrix::<f64>::identity(3);
        let p = Arc::new(build_quadratic(q, vec![0.0; 3], BlockPartition::scalar(3).unwrap(), vec![ConstraintSet::Free; 3]).unwrap());
        let cfg = RunConfig::new(Arc::clone(&p), Surrogate::exact(&p), Rule::GaussSeidel, 3, vec![0.0; 3]);
        assert!(matches!(run_a2bsum(&cfg), Err(BsumError::Unsupported(_))));
    }

    #[test]
    fn reference_on_worked_example() {
        let sol = reference_solve(&worked()).unwrap();
        assert!(sol.f.abs() < 1e-15);
        assert!(linalg::norm(&sol.x) < 1e-12);
    }
}
