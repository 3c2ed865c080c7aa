//! Inequality checks over recorded traces.

use serde::{Deserialize, Serialize};

use super::certificate::RateCertificate;
use super::sigma::RateConstant;
use crate::engine::{IterationRecord, Trace};
use crate::error::{BsumError, Result};
use crate::linalg::{self, dot, norm_inf, norm_sq};
use crate::problem::Problem;
use crate::rng;
use crate::scalar::Scalar;
use crate::surrogate::sample_point;

/// Absolute slack tolerance used by every check.
pub const CHECK_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Violated,
    /// Failed, but only against sampled constants (or nothing was checked).
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport<F> {
    pub id: String,
    /// Iteration index of each slack entry.
    pub indices: Vec<usize>,
    /// `rhs - lhs` per checked inequality; negative means violated.
    pub slacks: Vec<F>,
    pub max_violation: F,
    pub tolerance: F,
    pub pass: bool,
    pub verdict: Verdict,
    pub sampled_constants: bool,
}

impl<F: Scalar> CheckReport<F> {
    pub fn new(id: impl Into<String>, indices: Vec<usize>, slacks: Vec<F>, sampled_constants: bool) -> Self {
        let max_violation = slacks.iter().map(|&s| (-s).max(F::zero())).fold(F::zero(), F::max);
        let max_violation = if slacks.iter().any(|s| s.is_nan()) { F::infinity() } else { max_violation };
        let mut rep = Self {
            id: id.into(),
            indices,
            slacks,
            max_violation,
            tolerance: F::of(CHECK_TOLERANCE),
            pass: true,
            verdict: Verdict::Pass,
            sampled_constants,
        };
        rep.settle();
        rep
    }

    pub fn with_tolerance(mut self, tol: F) -> Self {
        self.tolerance = tol;
        self.settle();
        self
    }

    fn settle(&mut self) {
        self.pass = self.max_violation <= self.tolerance;
        self.verdict = if self.slacks.is_empty() {
            Verdict::Inconclusive
        } else if self.pass {
            Verdict::Pass
        } else if self.sampled_constants {
            Verdict::Inconclusive
        } else {
            Verdict::Violated
        };
    }

    pub fn checked(&self) -> usize {
        self.slacks.len()
    }

    pub fn min_slack(&self) -> Option<F> {
        self.slacks.iter().copied().reduce(F::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescentVariant {
    /// `f^r - f^{r+1} >= gamma ||x^r - x^{r+1}||^2`.
    GsEc,
    /// `f^r - f^{r+1} >= (q/K) gamma ||x^r - xhat^{r+1}||^2`.
    GsoMbi,
    /// `f^r - f^{r+1} >= (1/2M) sum of squared gradient differences`.
    Bcm,
    /// `f^r - f^{r+1} >= 2L ||xtilde^{r+1} - x^r||^2` (auxiliary point, `gamma = 4L`).
    Sum,
}

impl DescentVariant {
    pub fn id(self) -> &'static str {
        match self {
            Self::GsEc => "descent-gs-ec",
            Self::GsoMbi => "descent-gso-mbi",
            Self::Bcm => "descent-bcm",
            Self::Sum => "descent-sum",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostToGoVariant {
    Gs,
    Ec,
    GsoMbi,
    BcmGs,
    BcmEc,
    Sum,
}

impl CostToGoVariant {
    pub fn id(self) -> &'static str {
        match self {
            Self::Gs => "cost-gs",
            Self::Ec => "cost-ec",
            Self::GsoMbi => "cost-gso-mbi",
            Self::BcmGs => "cost-bcm-gs",
            Self::BcmEc => "cost-bcm-ec",
            Self::Sum => "cost-sum",
        }
    }
}

fn field<F: Copy>(rec: &IterationRecord<F>, get: fn(&IterationRecord<F>) -> Option<F>, name: &str) -> Result<F> {
    get(rec).ok_or_else(|| BsumError::MissingInput(format!("trace record {} lacks {name}", rec.r)))
}

fn sum_lipschitz<F: Scalar>(cert: &RateCertificate<F>) -> Result<F> {
    cert.sum_lipschitz
        .map(|t| t.value)
        .ok_or_else(|| BsumError::MissingInput("certificate lacks the single-block constant L".into()))
}

pub fn check_sufficient_descent<F: Scalar>(
    trace: &Trace<F>,
    cert: &RateCertificate<F>,
    variant: DescentVariant,
) -> Result<CheckReport<F>> {
    let recs = &trace.records;
    if recs.len() < 2 {
        return Err(BsumError::InsufficientData("sufficient descent needs at least two records".into()));
    }
    let k = F::of_usize(cert.blocks);
    let gamma = cert.gamma.value;
    let (coef, get, name): (F, fn(&IterationRecord<F>) -> Option<F>, &str) = match variant {
        DescentVariant::GsEc => (gamma, |r| r.step_sq, "step_sq"),
        DescentVariant::GsoMbi => (F::of(cert.q.unwrap_or(1.0)) / k * gamma, |r| r.virt_step_sq, "virt_step_sq"),
        DescentVariant::Bcm => (F::one() / (F::two() * cert.m.value), |r| r.grad_diff_sq, "grad_diff_sq"),
        DescentVariant::Sum => (F::two() * sum_lipschitz(cert)?, |r| r.aux_step_sq, "aux_step_sq"),
    };
    let mut idx = Vec::with_capacity(recs.len());
    let mut slacks = Vec::with_capacity(recs.len());
    for w in recs.windows(2) {
        let s = field(&w[0], get, name)?;
        idx.push(w[0].r);
        slacks.push(w[0].f - w[1].f - coef * s);
    }
    Ok(CheckReport::new(variant.id(), idx, slacks, false))
}

fn deltas<F: Scalar>(trace: &Trace<F>) -> Result<Vec<F>> {
    trace
        .records
        .iter()
        .map(|r| r.delta.map(|d| d.max(F::zero())))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| BsumError::MissingInput("trace has no optimal value attached".into()))
}

/// Checks the cost-to-go estimates in the form `Delta <= sqrt(C * S)`, which is
/// the squared inequality for non-negative gaps.
pub fn check_cost_to_go<F: Scalar>(
    trace: &Trace<F>,
    cert: &RateCertificate<F>,
    variant: CostToGoVariant,
) -> Result<CheckReport<F>> {
    let recs = &trace.records;
    if recs.len() < 2 {
        return Err(BsumError::InsufficientData("cost-to-go needs at least two records".into()));
    }
    let d = deltas(trace)?;
    let k = F::of_usize(cert.blocks);
    let t = cert.period.max(1);
    let tf = F::of_usize(t);
    let r2 = cert.r.value * cert.r.value;
    let g2 = cert.g_max.value * cert.g_max.value;
    let sampled = cert.has_sampled_bounds();
    let step: fn(&IterationRecord<F>) -> Option<F> = |r| r.step_sq;
    let grad: fn(&IterationRecord<F>) -> Option<F> = |r| r.grad_diff_sq;
    // (constant, statistic, window length, gap shift)
    let (c, get, name, window, shift) = match variant {
        CostToGoVariant::Gs => (r2 * k * g2, step, "step_sq", 1, 1),
        CostToGoVariant::Ec => (tf * r2 * k * g2, step, "step_sq", t, t),
        CostToGoVariant::GsoMbi => {
            let a = cert.q_grad.value + cert.l_h.value;
            let l = cert.l_max.value;
            (F::two() * (a * a + l * l * k * r2), (|r| r.virt_step_sq) as fn(&IterationRecord<F>) -> Option<F>, "virt_step_sq", 1, 0)
        }
        CostToGoVariant::BcmGs => (F::two() * k * k * r2, grad, "grad_diff_sq", 1, 1),
        CostToGoVariant::BcmEc => (F::two() * tf * k * k * r2, grad, "grad_diff_sq", t, t),
        CostToGoVariant::Sum => {
            let l = sum_lipschitz(cert)?;
            (F::of(64.0) * l * l * r2, (|r| r.aux_step_sq) as fn(&IterationRecord<F>) -> Option<F>, "aux_step_sq", 1, 1)
        }
    };
    let last = recs.len() - 1;
    let mut idx = Vec::new();
    let mut slacks = Vec::new();
    for r in 0..last {
        if r + window > last || r + shift > last {
            break;
        }
        let mut s = F::zero();
        for rec in &recs[r..r + window] {
            s += field(rec, get, name)?;
        }
        idx.push(recs[r].r);
        slacks.push((c * s).sqrt() - d[r + shift]);
    }
    Ok(CheckReport::new(variant.id(), idx, slacks, sampled))
}

/// `Delta^r <= (c/sigma) / (r - offset)` for every record with `r > offset`.
pub fn check_rate_envelope<F: Scalar>(trace: &Trace<F>, rc: &RateConstant<F>, sampled: bool) -> Result<CheckReport<F>> {
    let d = deltas(trace)?;
    let points: Vec<(usize, F)> = trace.records.iter().zip(d).map(|(rec, di)| (rec.r, di)).collect();
    Ok(envelope_report(&points, rc, sampled))
}

pub fn envelope_report<F: Scalar>(points: &[(usize, F)], rc: &RateConstant<F>, sampled: bool) -> CheckReport<F> {
    let mut idx = Vec::new();
    let mut slacks = Vec::new();
    for &(r, delta) in points {
        if let Some(bound) = rc.envelope(r) {
            idx.push(r);
            slacks.push(bound - delta);
        }
    }
    CheckReport::new("rate-envelope", idx, slacks, sampled)
}

pub fn sample_pairs<F: Scalar>(p: &Problem<F>, pairs: usize, scale: f64, seed: u64) -> Vec<(Vec<F>, Vec<F>)> {
    let mut rng = rng::seeded(rng::derive_seed(seed, "nesterov-pairs"));
    (0..pairs).map(|_| (sample_point(p, scale, &mut rng), sample_point(p, scale, &mut rng))).collect()
}

/// `g(x) - g(v) - <grad g(v), x - v> - ||grad g(v) - grad g(x)||^2 / (2M) >= 0`,
/// slacks normalized by `max(1, |g(x)| + |g(v)|)`. `m` overrides the declared `M`.
pub fn check_nesterov_inequality<F: Scalar>(p: &Problem<F>, pairs: &[(Vec<F>, Vec<F>)], m: Option<F>) -> CheckReport<F> {
    let g = p.smooth();
    let m = m.unwrap_or_else(|| g.lipschitz());
    let mut idx = Vec::with_capacity(pairs.len());
    let mut slacks = Vec::with_capacity(pairs.len());
    for (i, (x, v)) in pairs.iter().enumerate() {
        let (gx, gv) = (g.value(x), g.value(v));
        let (dx, dv) = (g.gradient(x), g.gradient(v));
        let lin = dot(&dv, &linalg::sub(x, v));
        let curv = norm_sq(&linalg::sub(&dv, &dx)) / (F::two() * m);
        let scale = F::one().max(gx.abs() + gv.abs());
        idx.push(i);
        slacks.push((gx - gv - lin - curv) / scale);
    }
    CheckReport::new("nesterov", idx, slacks, false)
}

/// Maximum over `points` of `||fd - grad||_inf / max(1, ||grad||_inf)` using
/// central differences of the smooth part and the per-block gradients.
pub fn fd_gradient_check<F: Scalar>(p: &Problem<F>, points: &[Vec<F>], step: F) -> Result<F> {
    if !(step > F::zero()) {
        return Err(BsumError::Parameter("finite-difference step must be positive".into()));
    }
    let g = p.smooth();
    let part = p.partition();
    let mut worst = F::zero();
    for x in points {
        part.check_len(x.len())?;
        let mut analytic = Vec::with_capacity(x.len());
        for k in 0..p.num_blocks() {
            analytic.extend(p.block_gradient(k, x)?);
        }
        let mut y = x.clone();
        let mut fd = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let h = step * (F::one() + x[i].abs());
            y[i] = x[i] + h;
            let up = g.value(&y);
            y[i] = x[i] - h;
            let down = g.value(&y);
            y[i] = x[i];
            fd.push((up - down) / (h + h));
        }
        let err = norm_inf(&linalg::sub(&fd, &analytic)) / F::one().max(norm_inf(&analytic));
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Least-squares slope of `ln Delta^r` against `ln r` over `burn_in <= r <= end`.
pub fn fit_decay_exponent<F: Scalar>(trace: &Trace<F>, burn_in: usize, end: Option<usize>) -> Result<F> {
    let pts: Vec<(usize, F)> = trace.records.iter().filter_map(|rec| rec.delta.map(|d| (rec.r, d))).collect();
    fit_decay_points(&pts, burn_in, end)
}

pub fn fit_decay_points<F: Scalar>(points: &[(usize, F)], burn_in: usize, end: Option<usize>) -> Result<F> {
    let floor = F::of(1e-14);
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(r, d)| r >= burn_in.max(1) && end.is_none_or(|e| r <= e) && d > floor)
        .map(|&(r, d)| ((r as f64).ln(), d.to_f64_lossy().ln()))
        .collect();
    if xy.len() < 20 {
        return Err(BsumError::InsufficientData(format!(
            "decay fit needs at least 20 gaps above 1e-14 after burn-in, found {}",
            xy.len()
        )));
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(F::of(sxy / sxx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::certificate::Tagged;
    use crate::engine::{run_bsum, RunConfig};
    use crate::linalg::DenseMatrix;
    use crate::models::build_quadratic;
    use crate::problem::{BlockPartition, ConstraintSet};
    use crate::scheduler::Rule;
    use crate::surrogate::Surrogate;
    use std::sync::Arc;

    fn worked() -> Arc<Problem<f64>> {
        // f(x) = x1^2 - 2 x1 x2 + 2 x2^2 = (x1 - x2)^2 + x2^2.
        let q = DenseMatrix::<f64>::from_rows(&[vec![1.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        Arc::new(build_quadratic(q, vec![0.0, 0.0], BlockPartition::scalar(2).unwrap(), vec![ConstraintSet::Free; 2]).unwrap())
    }

    fn cert_for(blocks: usize, r: f64) -> RateCertificate<f64> {
        RateCertificate {
            gamma: Tagged::declared(1.0),
            l_max: Tagged::declared(4.0),
            g_max: Tagged::declared(6.0),
            m: Tagged::declared(3.0 + 5f64.sqrt()),
            m_max: Tagged::declared(4.0),
            r: Tagged::exact(r),
            q_grad: Tagged::exact(4.0),
            l_h: Tagged::declared(0.0),
            q: None,
            period: 1,
            blocks,
            f_star: 0.0,
            f_first: 0.5,
            sum_lipschitz: None,
            composite: None,
            svm: None,
        }
    }

    #[test]
    fn first_sweep_descent() {
        let p = worked();
        let t = run_bsum(&RunConfig::new(Arc::clone(&p), Surrogate::exact(&p), Rule::GaussSeidel, 30, vec![1.0, 1.0]).with_optimum(0.0, 0.0))
            .unwrap();
        let rep = check_sufficient_descent(&t, &cert_for(2, 2f64.sqrt()), DescentVariant::GsEc).unwrap();
        assert!(rep.pass);
        // (1,1) -> (1,0.5): f drops from 1 to 0.5 with squared step 0.25.
        assert_eq!(t.records[1].f, 0.5);
        assert_eq!(t.records[0].step_sq, Some(0.25));
        assert!((rep.slacks[0] - (1.0 - t.records[1].f - t.records[0].step_sq.unwrap())).abs() < 1e-15);
        let tail = rep.slacks.last().unwrap();
        assert!(tail.abs() < 1e-12);
        for v in [CostToGoVariant::Gs, CostToGoVariant::BcmGs] {
            assert!(check_cost_to_go(&t, &cert_for(2, 2f64.sqrt()), v).unwrap().pass, "{v:?}");
        }
        assert!(check_sufficient_descent(&t, &cert_for(2, 1.0), DescentVariant::Bcm).unwrap().pass);
    }

    #[test]
    fn missing_fields() {
        let p = worked();
        let t = run_bsum(&RunConfig::new(Arc::clone(&p), Surrogate::exact(&p), Rule::GaussSeidel, 3, vec![1.0, 1.0])).unwrap();
        let c = cert_for(2, 1.0);
        assert!(matches!(check_sufficient_descent(&t, &c, DescentVariant::GsoMbi), Err(BsumError::MissingInput(_))));
        assert!(matches!(check_cost_to_go(&t, &c, CostToGoVariant::Gs), Err(BsumError::MissingInput(_))));
    }

    #[test]
    fn envelope_arithmetic() {
        let rc = RateConstant { sigma: 0.5, c: 2.0, offset: 0 };
        let rep = envelope_report(&[(1, 3.0), (2, 2.0), (3, 1.2)], &rc, false);
        assert!(rep.pass);
        assert_eq!(rep.slacks, vec![1.0, 0.0, 4.0 / 3.0 - 1.2]);
        let rc = RateConstant { sigma: 1.0, c: 1.0, offset: 0 };
        let pts: Vec<(usize, f64)> = (1..50).map(|r| (r, 1.0 / r as f64)).collect();
        assert!(envelope_report(&pts, &rc, false).pass);
        let bad = envelope_report(&[(1, 1.5)], &rc, false);
        assert_eq!(bad.verdict, Verdict::Violated);
        assert_eq!(envelope_report(&[(1, 1.5)], &rc, true).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn nesterov_square() {
        let q = DenseMatrix::<f64>::from_rows(&[vec![1.0]]).unwrap();
        let p = build_quadratic(q, vec![0.0], BlockPartition::single(1).unwrap(), vec![ConstraintSet::Free]).unwrap();
        let pairs = sample_pairs(&p, 20, 3.0, 1);
        let rep: CheckReport<f64> = check_nesterov_inequality(&p, &pairs, None);
        assert!(rep.slacks.iter().all(|s| s.abs() < 1e-12));
        let under = check_nesterov_inequality(&p, &pairs, Some(1.0));
        assert!(!under.pass);
    }

    #[test]
    fn fd_on_quadratic() {
        let p = worked();
        let pts = vec![vec![0.3, -1.2], vec![5.0, 2.0]];
        assert!(fd_gradient_check(&p, &pts, 1e-5).unwrap() < 1e-9);
        assert!(fd_gradient_check(&p, &pts, 0.0).is_err());
    }

    #[test]
    fn decay_slopes() {
        let one: Vec<(usize, f64)> = (1..=200).map(|r| (r, 1.0 / r as f64)).collect();
        assert!((fit_decay_points(&one, 1, None).unwrap() + 1.0).abs() < 1e-6);
        let two: Vec<(usize, f64)> = (1..=200).map(|r| (r, 1.0 / (r * r) as f64)).collect();
        assert!((fit_decay_points(&two, 10, Some(150)).unwrap() + 2.0).abs() < 1e-6);
        assert!(matches!(fit_decay_points(&one, 190, None), Err(BsumError::InsufficientData(_))));
    }
}
