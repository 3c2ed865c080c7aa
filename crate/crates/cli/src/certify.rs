//! Re-checks a recorded trace CSV against the run it came from.

use std::path::Path;

use bsum_core::engine::{Trace, TraceMetadata};
use bsum_core::trace::parse_csv;

use crate::config::{parse_config, ExperimentSpec, RunSpec};
use crate::error::{CliError, Result};
use crate::experiment::{assess, build_surrogate, load_instance, RunReport};
use crate::fsutil::read;

/// Picks the run a trace belongs to: the named one, or the only one.
pub fn select_run<'a>(spec: &'a ExperimentSpec, id: Option<&str>) -> Result<&'a RunSpec> {
    match id {
        Some(id) => spec.runs.iter().find(|r| r.id == id).ok_or_else(|| {
            let ids: Vec<&str> = spec.runs.iter().map(|r| r.id.as_str()).collect();
            CliError::Input(format!("no run '{id}' in config (runs: {})", ids.join(", ")))
        }),
        None if spec.runs.len() == 1 => Ok(&spec.runs[0]),
        None => Err(CliError::Input(format!("config defines {} runs; choose one with --run", spec.runs.len()))),
    }
}

/// Rebuilds the run's problem and surrogate, attaches a fresh reference value
/// and evaluates the applicable checks on the recorded statistics. Iterates
/// are not stored in trace files, so `R` and `Q` come from level-set samples.
pub fn certify_trace(trace_text: &str, spec: &ExperimentSpec, run: &RunSpec) -> Result<RunReport> {
    let records = parse_csv(trace_text).map_err(|e| CliError::Input(e.to_string()))?;
    let inst = load_instance(run)?;
    let s = build_surrogate(run, &inst)?;
    let meta = TraceMetadata {
        method: run.method.label().into(),
        rule: run.rule.label(),
        surrogate: s.label(),
        model: run.model.family().into(),
        blocks: inst.problem.num_blocks(),
        period: run.rule.period(),
        selection_q: run.rule.selection_q(),
        warnings: Vec::new(),
        notes: vec!["certified from a trace file".into()],
    };
    let mut trace = Trace::new(meta);
    trace.records = records;
    if trace.records.is_empty() {
        return Err(CliError::Input("trace file has no records".into()));
    }
    Ok(assess(run, &inst, &s, trace, spec.suite, spec.samples, spec.seed)?.report)
}

pub fn certify(trace_path: &Path, config_path: &Path, run_id: Option<&str>) -> Result<RunReport> {
    let spec = parse_config(config_path)?;
    let run = select_run(&spec, run_id)?;
    let text = read(trace_path).map_err(|e| CliError::Input(e.to_string()))?;
    certify_trace(&text, &spec, run).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", trace_path.display())),
        other => other,
    })
}
