//! Experiment configuration files.
//!
//! One `key = value` entry per line, values are JSON, keys are dotted:
//!
//! ```text
//! # global settings
//! seed = 7
//! output_dir = "results"
//! suite = ["descent", "cost-to-go"]
//!
//! run.gs.model = {"family": "lasso", "rows": 20, "cols": 50, "block_size": 5}
//! run.gs.rule = "gauss-seidel"
//! run.gs.iterations = 200
//! ```
//!
//! Blank lines and lines starting with `#` are skipped. Unknown keys are
//! rejected.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use bsum_core::models::ModelSpec;
use bsum_core::scheduler::Rule;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};

pub const DEFAULT_ITERATIONS: usize = 300;
pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_OUTPUT_DIR: &str = "bsum-output";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bsum,
    Sum,
    A2bsum,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Bsum => "bsum",
            Method::Sum => "sum",
            Method::A2bsum => "a2bsum",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockChoice {
    Exact,
    ProxLinear,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateChoice {
    Exact,
    ProxLinear,
    /// The model's own bound (IRLS).
    Model,
    PerBlock(Vec<BlockChoice>),
}

impl SurrogateChoice {
    pub fn is_exact(&self) -> bool {
        match self {
            SurrogateChoice::Exact => true,
            SurrogateChoice::PerBlock(b) => b.iter().all(|&c| c == BlockChoice::Exact),
            _ => false,
        }
    }
}

/// Which check families the diagnostic suite runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Suite {
    pub descent: bool,
    pub cost_to_go: bool,
    pub envelope: bool,
}

impl Suite {
    pub const ALL: Suite = Suite { descent: true, cost_to_go: true, envelope: true };
    pub const NONE: Suite = Suite { descent: false, cost_to_go: false, envelope: false };
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSpec {
    pub id: String,
    pub model: ModelSpec,
    /// Instance file replacing the seeded data.
    pub instance: Option<PathBuf>,
    pub method: Method,
    pub surrogate: SurrogateChoice,
    pub rule: Rule,
    pub iterations: usize,
    /// Instance seed; runs that share it share the instance.
    pub seed: u64,
    pub x0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub suite: Suite,
    pub samples: usize,
    pub runs: Vec<RunSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: Value,
    pub line: usize,
}

fn valid_key(key: &str) -> bool {
    key.split('.').all(|seg| !seg.is_empty() && seg.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'))
}

/// Splits a config text into entries. Errors carry the offending line.
pub fn parse_entries(text: &str, path: &str) -> Result<Vec<Entry>> {
    let syntax = |line: usize, msg: String| CliError::Syntax { path: path.to_string(), line, msg };
    let mut out = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (key, value) = t.split_once('=').ok_or_else(|| syntax(line, "expected 'key = value'".into()))?;
        let key = key.trim();
        if !valid_key(key) {
            return Err(syntax(line, format!("invalid key '{key}'")));
        }
        let value = value.trim();
        if value.is_empty() {
            return Err(syntax(line, format!("missing value for '{key}'")));
        }
        let value: Value = serde_json::from_str(value).map_err(|e| syntax(line, format!("invalid JSON value for '{key}': {e}")))?;
        if let Some(first) = seen.insert(key.to_string(), line) {
            return Err(syntax(line, format!("duplicate key '{key}' (first set on line {first})")));
        }
        out.push(Entry { key: key.to_string(), value, line });
    }
    Ok(out)
}

struct Ctx<'a> {
    path: &'a str,
}

impl Ctx<'_> {
    fn field(&self, e: &Entry, msg: impl Into<String>) -> CliError {
        CliError::Field { path: self.path.to_string(), line: e.line, field: e.key.clone(), msg: msg.into() }
    }

    fn get<T: DeserializeOwned>(&self, e: &Entry, what: &str) -> Result<T> {
        serde_json::from_value(e.value.clone()).map_err(|err| self.field(e, format!("expected {what}: {err}")))
    }

    fn string(&self, e: &Entry) -> Result<String> {
        self.get(e, "a string")
    }
}

fn parse_suite(ctx: &Ctx, e: &Entry) -> Result<Suite> {
    let names: Vec<String> = match &e.value {
        Value::String(s) if s == "all" => return Ok(Suite::ALL),
        Value::String(s) if s == "none" => return Ok(Suite::NONE),
        Value::String(s) => vec![s.clone()],
        _ => ctx.get(e, "\"all\", \"none\" or a list of check families")?,
    };
    let mut suite = Suite::NONE;
    for n in names {
        match n.as_str() {
            "descent" => suite.descent = true,
            "cost-to-go" => suite.cost_to_go = true,
            "envelope" => suite.envelope = true,
            other => return Err(ctx.field(e, format!("unknown check family '{other}' (expected descent, cost-to-go, envelope)"))),
        }
    }
    Ok(suite)
}

fn parse_method(ctx: &Ctx, e: &Entry) -> Result<Method> {
    match ctx.string(e)?.as_str() {
        "bsum" => Ok(Method::Bsum),
        "sum" => Ok(Method::Sum),
        "a2bsum" => Ok(Method::A2bsum),
        other => Err(ctx.field(e, format!("unknown method '{other}' (expected bsum, sum, a2bsum)"))),
    }
}

fn parse_block_choice(ctx: &Ctx, e: &Entry, s: &str) -> Result<BlockChoice> {
    match s {
        "exact" => Ok(BlockChoice::Exact),
        "prox-linear" => Ok(BlockChoice::ProxLinear),
        other => Err(ctx.field(e, format!("unknown block surrogate '{other}' (expected exact, prox-linear)"))),
    }
}

fn parse_surrogate(ctx: &Ctx, e: &Entry) -> Result<SurrogateChoice> {
    match &e.value {
        Value::String(s) => match s.as_str() {
            "exact" => Ok(SurrogateChoice::Exact),
            "prox-linear" => Ok(SurrogateChoice::ProxLinear),
            "model" => Ok(SurrogateChoice::Model),
            other => Err(ctx.field(e, format!("unknown surrogate '{other}' (expected exact, prox-linear, model or a per-block list)"))),
        },
        _ => {
            let list: Vec<String> = ctx.get(e, "a surrogate name or a per-block list")?;
            Ok(SurrogateChoice::PerBlock(list.iter().map(|s| parse_block_choice(ctx, e, s)).collect::<Result<_>>()?))
        }
    }
}

#[derive(Default)]
struct RunEntries<'a> {
    first_line: usize,
    fields: BTreeMap<&'a str, &'a Entry>,
}

const RUN_FIELDS: [&str; 12] =
    ["model", "instance", "method", "surrogate", "rule", "q", "period_map", "order", "rule_seed", "iterations", "seed", "x0"];

fn build_rule(ctx: &Ctx, id: &str, run: &RunEntries, blocks: usize) -> Result<Rule> {
    let name = match run.fields.get("rule") {
        Some(e) => ctx.string(e)?,
        None => "gauss-seidel".into(),
    };
    let allowed: &[&str] = match name.as_str() {
        "gauss-seidel" | "mbi" => &[],
        "essentially-cyclic" => &["period_map"],
        "gauss-southwell" => &["q"],
        "random-permutation" => &["rule_seed"],
        "fixed-order" => &["order"],
        other => {
            return Err(ctx.field(
                run.fields["rule"],
                format!(
                    "unknown rule '{other}' (expected gauss-seidel, essentially-cyclic, gauss-southwell, mbi, random-permutation, fixed-order)"
                ),
            ))
        }
    };
    for param in ["q", "period_map", "order", "rule_seed"] {
        if let Some(e) = run.fields.get(param) {
            if !allowed.contains(&param) {
                return Err(ctx.field(e, format!("not a parameter of rule '{name}'")));
            }
        }
    }
    let required = |param: &str| -> Result<&Entry> {
        run.fields.get(param).copied().ok_or_else(|| CliError::Field {
            path: ctx.path.to_string(),
            line: run.first_line,
            field: format!("run.{id}.{param}"),
            msg: format!("required by rule '{name}'"),
        })
    };
    let (rule, source) = match name.as_str() {
        "gauss-seidel" => (Rule::GaussSeidel, run.fields.get("rule").copied()),
        "mbi" => (Rule::MaxBlockImprovement, run.fields.get("rule").copied()),
        "essentially-cyclic" => {
            let e = required("period_map")?;
            (Rule::EssentiallyCyclic { period_map: ctx.get(e, "a list of block index lists")? }, Some(e))
        }
        "gauss-southwell" => {
            let e = required("q")?;
            (Rule::GaussSouthwell { q: ctx.get(e, "a number")? }, Some(e))
        }
        "random-permutation" => {
            let e = run.fields.get("rule_seed").copied();
            let seed = match e {
                Some(e) => ctx.get(e, "a nonnegative integer")?,
                None => 0,
            };
            (Rule::RandomPermutation { seed }, e.or(run.fields.get("rule").copied()))
        }
        _ => {
            let e = required("order")?;
            (Rule::FixedOrder { order: ctx.get(e, "a list of block indices")? }, Some(e))
        }
    };
    if let Err(err) = rule.validate(blocks) {
        let msg = err.to_string().trim_start_matches("invalid schedule: ").to_string();
        return Err(match source {
            Some(e) => ctx.field(e, msg),
            None => CliError::Field { path: ctx.path.to_string(), line: run.first_line, field: format!("run.{id}.rule"), msg },
        });
    }
    Ok(rule)
}

fn build_run(ctx: &Ctx, id: &str, run: &RunEntries, global_seed: u64, base: &Path) -> Result<RunSpec> {
    let model_entry = run.fields.get("model").copied().ok_or_else(|| CliError::Field {
        path: ctx.path.to_string(),
        line: run.first_line,
        field: format!("run.{id}.model"),
        msg: "missing required key".into(),
    })?;
    let model: ModelSpec = ctx.get(model_entry, "a model object with a \"family\" tag")?;
    let blocks = model
        .num_blocks()
        .ok_or_else(|| ctx.field(model_entry, "block_size must be positive and divide the number of columns"))?;

    let method = match run.fields.get("method") {
        Some(e) => {
            let m = parse_method(ctx, e)?;
            match m {
                Method::Sum if blocks != 1 => return Err(ctx.field(e, format!("sum needs a single-block model, this one has {blocks} blocks"))),
                Method::A2bsum if blocks != 2 => return Err(ctx.field(e, format!("a2bsum needs a two-block model, this one has {blocks} blocks"))),
                _ => m,
            }
        }
        None => Method::Bsum,
    };

    let surrogate = match run.fields.get("surrogate") {
        Some(e) => {
            let s = parse_surrogate(ctx, e)?;
            match &s {
                SurrogateChoice::Model if !matches!(model, ModelSpec::FermatWeber { .. }) => {
                    return Err(ctx.field(e, format!("family '{}' has no model-specific bound", model.family())))
                }
                SurrogateChoice::PerBlock(list) if list.len() != blocks => {
                    return Err(ctx.field(e, format!("per-block list has {} entries for {blocks} blocks", list.len())))
                }
                _ => {}
            }
            s
        }
        None if method == Method::A2bsum => SurrogateChoice::PerBlock(vec![BlockChoice::ProxLinear, BlockChoice::Exact]),
        None if matches!(model, ModelSpec::FermatWeber { .. }) => SurrogateChoice::Model,
        None => SurrogateChoice::ProxLinear,
    };

    let rule = build_rule(ctx, id, run, blocks)?;
    if method != Method::Bsum {
        if let Some(e) = run.fields.get("rule") {
            return Err(ctx.field(e, format!("{} has a fixed update order; remove the rule", method.label())));
        }
    }

    let iterations = match run.fields.get("iterations") {
        Some(e) => {
            let n: usize = ctx.get(e, "a positive integer")?;
            if n == 0 {
                return Err(ctx.field(e, "must be at least 1"));
            }
            n
        }
        None => DEFAULT_ITERATIONS,
    };
    let seed = match run.fields.get("seed") {
        Some(e) => ctx.get(e, "a nonnegative integer")?,
        None => global_seed,
    };
    let instance = match run.fields.get("instance") {
        Some(e) => Some(base.join(ctx.string(e)?)),
        None => None,
    };
    let x0 = match run.fields.get("x0") {
        Some(e) => Some(ctx.get(e, "a list of numbers")?),
        None => None,
    };
    Ok(RunSpec { id: id.to_string(), model, instance, method, surrogate, rule, iterations, seed, x0 })
}

/// Builds an experiment from parsed entries. Relative paths resolve against
/// `base`.
pub fn spec_from_entries(entries: &[Entry], path: &str, base: &Path) -> Result<ExperimentSpec> {
    let ctx = Ctx { path };
    let mut seed = 0u64;
    let mut output_dir = base.join(DEFAULT_OUTPUT_DIR);
    let mut suite = Suite::ALL;
    let mut samples = DEFAULT_SAMPLES;
    let mut order: Vec<&str> = Vec::new();
    let mut runs: HashMap<&str, RunEntries> = HashMap::new();

    for e in entries {
        let segs: Vec<&str> = e.key.split('.').collect();
        match segs.as_slice() {
            ["seed"] => seed = ctx.get(e, "a nonnegative integer")?,
            ["output_dir"] => output_dir = base.join(ctx.string(e)?),
            ["suite"] => suite = parse_suite(&ctx, e)?,
            ["estimate_samples"] => {
                samples = ctx.get(e, "a positive integer")?;
                if samples == 0 {
                    return Err(ctx.field(e, "must be at least 1"));
                }
            }
            ["run", id, field] => {
                if !RUN_FIELDS.contains(field) {
                    return Err(ctx.field(e, format!("unknown run key '{field}'")));
                }
                let run = runs.entry(id).or_insert_with(|| {
                    order.push(id);
                    RunEntries { first_line: e.line, ..RunEntries::default() }
                });
                run.fields.insert(field, e);
            }
            _ => return Err(ctx.field(e, "unknown key")),
        }
    }
    if order.is_empty() {
        return Err(CliError::Input(format!("{path}: no runs defined (expected run.<id>.model entries)")));
    }
    let runs = order.iter().map(|id| build_run(&ctx, id, &runs[id], seed, base)).collect::<Result<Vec<_>>>()?;
    Ok(ExperimentSpec { seed, output_dir, suite, samples, runs })
}

pub fn parse_str(text: &str, path: &str, base: &Path) -> Result<ExperimentSpec> {
    spec_from_entries(&parse_entries(text, path)?, path, base)
}

pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_str(&text, &path.display().to_string(), base)
}
