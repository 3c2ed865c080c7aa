//! Rate certificates and numerical checks of the descent, cost-to-go and
//! envelope inequalities on recorded traces.

pub mod certificate;
pub mod checks;
pub mod sigma;

pub use certificate::{
    estimate_constants, CompositeConstants, EstimateOptions, Provenance, RateCertificate, SvmConstants, Tagged,
};
pub use checks::{
    check_cost_to_go, check_nesterov_inequality, check_rate_envelope, check_sufficient_descent, envelope_report,
    fd_gradient_check, fit_decay_exponent, fit_decay_points, sample_pairs, CheckReport, CostToGoVariant,
    DescentVariant, Verdict, CHECK_TOLERANCE,
};
pub use sigma::{c_constant, sigma_for, RateConstant, Theorem};

use serde::{Deserialize, Serialize};

use crate::engine::Trace;
use crate::error::Result;
use crate::scalar::Scalar;
use crate::scheduler::Rule;

/// Which checks apply to a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckPlan {
    pub descent: Vec<DescentVariant>,
    pub cost_to_go: Vec<CostToGoVariant>,
    pub envelopes: Vec<Theorem>,
}

impl CheckPlan {
    pub fn is_empty(&self) -> bool {
        self.descent.is_empty() && self.cost_to_go.is_empty() && self.envelopes.is_empty()
    }
}

/// Applicable checks for a BSUM-family run.
///
/// `exact` is BCM, `composite`/`svm` add the specialized BCM envelopes under
/// full sweeps. Block-wise strong convexity (`gamma > 0`) enables the
/// step-norm based checks for exact surrogates.
pub fn plan_for<F: Scalar>(rule: &Rule, cert: &RateCertificate<F>, exact: bool) -> CheckPlan {
    let mut plan = CheckPlan::default();
    let bsc = cert.gamma.value > F::zero();
    if cert.blocks == 1 && cert.sum_lipschitz.is_some() && !exact {
        plan.descent.push(DescentVariant::Sum);
        plan.cost_to_go.push(CostToGoVariant::Sum);
        plan.envelopes.push(Theorem::Sigma4);
    }
    match rule {
        Rule::GaussSeidel | Rule::FixedOrder { .. } | Rule::RandomPermutation { .. } => {
            if bsc {
                plan.descent.push(DescentVariant::GsEc);
                plan.cost_to_go.push(CostToGoVariant::Gs);
                plan.envelopes.push(Theorem::Sigma1);
            }
            if exact {
                plan.descent.push(DescentVariant::Bcm);
                plan.cost_to_go.push(CostToGoVariant::BcmGs);
                plan.envelopes.push(Theorem::Sigma5);
                if cert.composite.is_some() {
                    plan.envelopes.push(Theorem::Sigma7);
                }
                if cert.svm.is_some() {
                    plan.envelopes.push(Theorem::Sigma8);
                }
            }
        }
        Rule::EssentiallyCyclic { .. } => {
            if bsc {
                plan.descent.push(DescentVariant::GsEc);
                plan.cost_to_go.push(CostToGoVariant::Ec);
                plan.envelopes.push(Theorem::Sigma2);
            }
            if exact {
                plan.descent.push(DescentVariant::Bcm);
                plan.cost_to_go.push(CostToGoVariant::BcmEc);
                plan.envelopes.push(Theorem::Sigma6);
            }
        }
        Rule::GaussSouthwell { .. } | Rule::MaxBlockImprovement => {
            if bsc {
                plan.descent.push(DescentVariant::GsoMbi);
                plan.cost_to_go.push(CostToGoVariant::GsoMbi);
                plan.envelopes.push(Theorem::Sigma3);
            }
        }
    }
    plan
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport<F> {
    pub theorem: Theorem,
    pub constant: RateConstant<F>,
    pub report: CheckReport<F>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport<F> {
    pub descent: Vec<CheckReport<F>>,
    pub cost_to_go: Vec<CheckReport<F>>,
    pub envelopes: Vec<EnvelopeReport<F>>,
}

impl<F: Scalar> SuiteReport<F> {
    pub fn reports(&self) -> impl Iterator<Item = &CheckReport<F>> {
        self.descent.iter().chain(&self.cost_to_go).chain(self.envelopes.iter().map(|e| &e.report))
    }

    pub fn all_pass(&self) -> bool {
        self.reports().all(|r| r.pass)
    }

    /// `true` when some check failed with a verdict other than inconclusive.
    pub fn any_violated(&self) -> bool {
        self.reports().any(|r| r.verdict == Verdict::Violated)
    }
}

pub fn run_plan<F: Scalar>(trace: &Trace<F>, cert: &RateCertificate<F>, plan: &CheckPlan) -> Result<SuiteReport<F>> {
    let descent = plan.descent.iter().map(|&v| check_sufficient_descent(trace, cert, v)).collect::<Result<_>>()?;
    let cost_to_go = plan.cost_to_go.iter().map(|&v| check_cost_to_go(trace, cert, v)).collect::<Result<_>>()?;
    let envelopes = plan
        .envelopes
        .iter()
        .map(|&th| {
            let constant = sigma_for(th, cert)?;
            let mut report = check_rate_envelope(trace, &constant, cert.has_sampled_bounds())?;
            report.id = format!("envelope-{}", th.id());
            Ok(EnvelopeReport { theorem: th, constant, report })
        })
        .collect::<Result<_>>()?;
    Ok(SuiteReport { descent, cost_to_go, envelopes })
}
