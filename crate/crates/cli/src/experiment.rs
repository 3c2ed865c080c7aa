//! Batch execution: one trace CSV and one JSON report per run, plus
//! `summary.csv`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use bsum_core::diagnostics::{
    check_cost_to_go, check_rate_envelope, check_sufficient_descent, estimate_constants, fit_decay_exponent, plan_for,
    sigma_for, CheckPlan, CostToGoVariant, DescentVariant, EnvelopeReport, EstimateOptions, RateCertificate,
    SuiteReport, Theorem,
};
use bsum_core::engine::{reference_solve, run_a2bsum, run_bsum, run_sum, RunConfig, RunOptions, Trace};
use bsum_core::models::io::read_matrices;
use bsum_core::models::{build_instance, instance_from_data, Instance, ModelSpec};
use bsum_core::scheduler::Rule;
use bsum_core::surrogate::{BlockSurrogate, Surrogate};
use bsum_core::trace::{format_float, to_csv};
use bsum_core::BsumError;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BlockChoice, ExperimentSpec, Method, RunSpec, Suite, SurrogateChoice};
use crate::error::{CliError, Result};
use crate::fsutil::{read, write_atomic};

/// Environment variable overriding the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "BSUM_OUTPUT_DIR";

pub const SUMMARY_HEADER: &str =
    "run_id,method,model,rule,surrogate,iterations,final_f,final_delta,fitted_slope,checks_pass,status";

#[derive(Clone, Debug, Serialize)]
pub struct ReferenceInfo {
    pub f: f64,
    pub converged: bool,
    pub method: String,
    pub sweeps: usize,
    pub achieved_change: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub run_id: String,
    pub model: ModelSpec,
    pub method: String,
    pub rule: String,
    pub surrogate: String,
    pub iterations: usize,
    pub final_f: f64,
    pub f_star: f64,
    pub final_delta: f64,
    pub fitted_slope: Option<f64>,
    /// Why no slope was fitted.
    pub slope_note: Option<String>,
    pub reference: ReferenceInfo,
    pub certificate: Option<RateCertificate<f64>>,
    pub plan: CheckPlan,
    pub checks: SuiteReport<f64>,
    /// Planned checks that could not be evaluated on this trace.
    pub skipped: Vec<String>,
    /// `None` when no check was evaluated.
    pub all_checks_pass: Option<bool>,
    pub any_violated: bool,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub id: String,
    pub result: std::result::Result<RunReport, String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    pub runs: Vec<RunOutcome>,
}

impl ExperimentOutcome {
    pub fn any_failed(&self) -> bool {
        self.runs.iter().any(|r| r.result.is_err())
    }

    pub fn any_violated(&self) -> bool {
        self.runs.iter().any(|r| r.result.as_ref().is_ok_and(|rep| rep.any_violated))
    }

    /// 0 success, 2 a run failed, 3 a check reported a violation.
    pub fn exit_code(&self) -> u8 {
        if self.any_failed() {
            2
        } else if self.any_violated() {
            3
        } else {
            0
        }
    }
}

pub fn load_instance(run: &RunSpec) -> Result<Instance<f64>> {
    match &run.instance {
        Some(path) => {
            let mats = read_matrices::<f64>(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            instance_from_data(&run.model, &mats).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
        }
        None => Ok(build_instance(&run.model, run.seed)?),
    }
}

pub fn build_surrogate(run: &RunSpec, inst: &Instance<f64>) -> Result<Surrogate<f64>> {
    let p = inst.problem.as_ref();
    Ok(match &run.surrogate {
        SurrogateChoice::Exact => Surrogate::exact(p),
        SurrogateChoice::ProxLinear => Surrogate::prox_linear(p),
        SurrogateChoice::Model => inst
            .custom_surrogate
            .clone()
            .ok_or_else(|| CliError::Run(format!("family '{}' has no model-specific bound", run.model.family())))?,
        SurrogateChoice::PerBlock(list) => {
            let blocks = list
                .iter()
                .enumerate()
                .map(|(k, c)| match c {
                    BlockChoice::Exact => BlockSurrogate::Exact,
                    BlockChoice::ProxLinear => BlockSurrogate::ProxLinear { step: p.smooth().block_lipschitz(k) },
                })
                .collect();
            Surrogate::mixed(p, blocks)?
        }
    })
}

fn filter_plan(mut plan: CheckPlan, suite: Suite) -> CheckPlan {
    if !suite.descent {
        plan.descent.clear();
    }
    if !suite.cost_to_go {
        plan.cost_to_go.clear();
    }
    if !suite.envelope {
        plan.envelopes.clear();
    }
    plan
}

/// Applicable checks for `run`, before suite filtering.
pub fn plan_for_run(run: &RunSpec, cert: &RateCertificate<f64>) -> CheckPlan {
    match run.method {
        Method::Bsum => plan_for(&run.rule, cert, run.surrogate.is_exact()),
        Method::Sum if cert.sum_lipschitz.is_some() => CheckPlan {
            descent: vec![DescentVariant::Sum],
            cost_to_go: vec![CostToGoVariant::Sum],
            envelopes: vec![Theorem::Sigma4],
        },
        // The accelerated method is judged by its fitted decay exponent only.
        Method::Sum | Method::A2bsum => CheckPlan::default(),
    }
}

fn skippable(e: &BsumError) -> bool {
    matches!(e, BsumError::MissingInput(_) | BsumError::InsufficientData(_))
}

/// Runs every planned check; checks whose inputs the trace lacks are skipped
/// with a reason instead of failing the whole suite.
pub fn run_checks(trace: &Trace<f64>, cert: &RateCertificate<f64>, plan: &CheckPlan) -> Result<(SuiteReport<f64>, Vec<String>)> {
    let mut skipped = Vec::new();
    let mut suite = SuiteReport { descent: Vec::new(), cost_to_go: Vec::new(), envelopes: Vec::new() };
    let keep = |id: String, e: BsumError, skipped: &mut Vec<String>| -> Result<()> {
        if skippable(&e) {
            skipped.push(format!("{id}: {e}"));
            Ok(())
        } else {
            Err(e.into())
        }
    };
    for &v in &plan.descent {
        match check_sufficient_descent(trace, cert, v) {
            Ok(rep) => suite.descent.push(rep),
            Err(e) => keep(format!("{v:?}"), e, &mut skipped)?,
        }
    }
    for &v in &plan.cost_to_go {
        match check_cost_to_go(trace, cert, v) {
            Ok(rep) => suite.cost_to_go.push(rep),
            Err(e) => keep(format!("{v:?}"), e, &mut skipped)?,
        }
    }
    for &th in &plan.envelopes {
        let res = sigma_for(th, cert).and_then(|constant| {
            let mut report = check_rate_envelope(trace, &constant, cert.has_sampled_bounds())?;
            report.id = format!("envelope-{}", th.id());
            Ok(EnvelopeReport { theorem: th, constant, report })
        });
        match res {
            Ok(rep) => suite.envelopes.push(rep),
            Err(e @ BsumError::Parameter(_)) => skipped.push(format!("envelope-{}: {e}", th.id())),
            Err(e) => keep(format!("envelope-{}", th.id()), e, &mut skipped)?,
        }
    }
    Ok((suite, skipped))
}

fn fitted_slope(trace: &Trace<f64>) -> (Option<f64>, Option<String>) {
    let n = trace.records.last().map_or(0, |r| r.r);
    match fit_decay_exponent(trace, (n / 10).max(1), None) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

/// Everything after the run itself: reference, certificate, checks, slope.
pub struct Assessment {
    pub trace: Trace<f64>,
    pub report: RunReport,
}

pub fn assess(run: &RunSpec, inst: &Instance<f64>, s: &Surrogate<f64>, mut trace: Trace<f64>, suite: Suite, samples: usize, seed: u64) -> Result<Assessment> {
    let p = inst.problem.as_ref();
    let reference = reference_solve(p)?;
    let f_star = reference.f.min(trace.min_objective());
    trace.attach_optimum(f_star);

    let mut cert = estimate_constants(p, s, &trace, Some(&reference.x), Some(f_star), &EstimateOptions { samples, seed })?;
    if run.surrogate.is_exact() {
        if let Some(c) = &inst.composite {
            cert = cert.with_composite(c);
        }
        if let Some(d) = &inst.svm {
            cert = cert.with_svm(d);
        }
    }
    let plan = filter_plan(plan_for_run(run, &cert), suite);
    let (checks, skipped) = run_checks(&trace, &cert, &plan)?;
    let evaluated = checks.reports().count();
    let any_violated = checks.any_violated();
    let (fitted_slope, slope_note) = fitted_slope(&trace);
    let final_f = trace.final_objective();
    let report = RunReport {
        run_id: run.id.clone(),
        model: run.model.clone(),
        method: run.method.label().into(),
        rule: trace.metadata.rule.clone(),
        surrogate: trace.metadata.surrogate.clone(),
        iterations: trace.records.last().map_or(0, |r| r.r),
        final_f,
        f_star,
        final_delta: final_f - f_star,
        fitted_slope,
        slope_note,
        reference: ReferenceInfo {
            f: reference.f,
            converged: reference.converged,
            method: reference.method.clone(),
            sweeps: reference.sweeps,
            achieved_change: reference.achieved_change,
        },
        all_checks_pass: (evaluated > 0).then(|| checks.all_pass()),
        any_violated,
        certificate: Some(cert),
        plan,
        checks,
        skipped,
        warnings: trace.metadata.warnings.clone(),
        notes: trace.metadata.notes.clone(),
    };
    Ok(Assessment { trace, report })
}

pub fn execute_run(run: &RunSpec, spec: &ExperimentSpec) -> Result<Assessment> {
    let inst = load_instance(run)?;
    let p = Arc::clone(&inst.problem);
    let s = build_surrogate(run, &inst)?;
    let x0 = match &run.x0 {
        Some(x) => x.clone(),
        None => p.project(&vec![0.0; p.dim()]),
    };
    let options = RunOptions { auxiliary: p.num_blocks() == 1, ..RunOptions::default() };
    let rule = if run.method == Method::Bsum { run.rule.clone() } else { Rule::GaussSeidel };
    let cfg = RunConfig::new(Arc::clone(&p), s.clone(), rule, run.iterations, x0).with_options(options);
    let trace = match run.method {
        Method::Bsum => run_bsum(&cfg),
        Method::Sum => run_sum(&cfg),
        Method::A2bsum => run_a2bsum(&cfg),
    }?;
    assess(run, &inst, &s, trace, spec.suite, spec.samples, spec.seed)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub fn summary_row(run: &RunSpec, outcome: &RunOutcome) -> String {
    let fields: Vec<String> = match &outcome.result {
        Ok(rep) => vec![
            rep.run_id.clone(),
            rep.method.clone(),
            rep.model.family().into(),
            rep.rule.clone(),
            rep.surrogate.clone(),
            rep.iterations.to_string(),
            format_float(rep.final_f),
            format_float(rep.final_delta),
            opt_float(rep.fitted_slope),
            rep.all_checks_pass.map(|b| b.to_string()).unwrap_or_default(),
            "ok".into(),
        ],
        Err(msg) => vec![
            run.id.clone(),
            run.method.label().into(),
            run.model.family().into(),
            run.rule.label(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            format!("error: {msg}"),
        ],
    };
    fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",")
}

pub fn trace_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.trace.csv"))
}

pub fn report_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.report.json"))
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Run(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Output directory precedence: explicit override, then the environment
/// variable, then the config.
pub fn resolve_output_dir(spec: &ExperimentSpec, cli_override: Option<&Path>) -> PathBuf {
    if let Some(p) = cli_override {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => spec.output_dir.clone(),
    }
}

/// Runs every configured run (in parallel) and writes the artifacts into
/// `out`. Individual run failures are recorded, not propagated.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path) -> Result<ExperimentOutcome> {
    let runs: Vec<RunOutcome> = spec
        .runs
        .par_iter()
        .map(|run| {
            let res = execute_run(run, spec).and_then(|a| {
                write_atomic(&trace_path(out, &run.id), &to_csv(&a.trace))?;
                write_atomic(&report_path(out, &run.id), &to_json(&a.report)?)?;
                Ok(a.report)
            });
            RunOutcome { id: run.id.clone(), result: res.map_err(|e| e.to_string()) }
        })
        .collect();
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for (run, outcome) in spec.runs.iter().zip(&runs) {
        summary.push_str(&summary_row(run, outcome));
        summary.push('\n');
    }
    write_atomic(&out.join("summary.csv"), &summary)?;
    Ok(ExperimentOutcome { output_dir: out.to_path_buf(), runs })
}
