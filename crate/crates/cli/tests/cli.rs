use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bsum(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bsum"));
    cmd.args(args).env_remove("BSUM_OUTPUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn bsum")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const TWO_RUN: &str = r#"
seed = 4
output_dir = "out"
run.bcpg.model = {"family": "lasso", "rows": 20, "cols": 50}
run.bcpg.surrogate = "prox-linear"
run.bcpg.iterations = 100
run.bcm.model = {"family": "lasso", "rows": 20, "cols": 50}
run.bcm.surrogate = "exact"
run.bcm.iterations = 50
"#;

/// Splits a CSV line, honouring double-quoted fields.
fn split_csv(line: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                chars.next();
                out.last_mut().unwrap().push('"');
            }
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(String::new()),
            _ => out.last_mut().unwrap().push(c),
        }
    }
    out
}

fn summary(dir: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join("summary.csv")).unwrap().lines().map(split_csv).collect()
}

fn report(dir: &Path, id: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{id}.report.json"))).unwrap()).unwrap()
}

#[test]
fn two_run_spec_writes_traces_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "exp.cfg", TWO_RUN);
    let out = bsum(&["run", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let dir = tmp.path().join("out");
    for id in ["bcpg", "bcm"] {
        let trace = fs::read_to_string(dir.join(format!("{id}.trace.csv"))).unwrap();
        assert_eq!(trace.lines().next().unwrap(), "r,f,delta,step_sq,virt_step_sq,grad_diff_sq,blocks,descent_slack");
        let rep = report(&dir, id);
        assert_eq!(rep["all_checks_pass"], Value::Bool(true), "{id}");
        assert_eq!(rep["any_violated"], Value::Bool(false));
    }
    let rows = summary(&dir);
    assert_eq!(rows[0].join(","), "run_id,method,model,rule,surrogate,iterations,final_f,final_delta,fitted_slope,checks_pass,status");
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][0], "bcpg");
    assert_eq!(rows[2][0], "bcm");
    assert_eq!(rows[2][4], "exact");
    assert_eq!(rows[2][5], "50");
    assert!(rows[1..].iter().all(|r| r[9] == "true" && r[10] == "ok"));
    // Same seed, same instance: both runs approach one optimum.
    let f: Vec<f64> = rows[1..].iter().map(|r| r[6].parse().unwrap()).collect();
    assert!((f[0] - f[1]).abs() < 1e-8);
}

#[test]
fn rerun_is_bitwise_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "exp.cfg", TWO_RUN);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&bsum(&["run", cfg.to_str().unwrap(), "--output-dir", a.to_str().unwrap()], &[])), 0);
    assert_eq!(code(&bsum(&["run", cfg.to_str().unwrap(), "--output-dir", b.to_str().unwrap()], &[])), 0);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 5);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "exp.cfg", TWO_RUN);
    let env_dir = tmp.path().join("from-env");
    let out = bsum(&["run", cfg.to_str().unwrap()], &[("BSUM_OUTPUT_DIR", &env_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(env_dir.join("summary.csv").exists());
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn acceleration_comparison_reports_both_slopes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "acc.cfg",
        r#"
seed = 2
run.acc.model = {"family": "two-block-quadratic", "n1": 100, "n2": 8}
run.acc.method = "a2bsum"
run.acc.iterations = 300
run.plain.model = {"family": "two-block-quadratic", "n1": 100, "n2": 8}
run.plain.surrogate = ["prox-linear", "exact"]
run.plain.rule = "fixed-order"
run.plain.order = [1, 0]
run.plain.iterations = 300
"#,
    );
    let dir = tmp.path().join("res");
    let out = bsum(&["run", cfg.to_str().unwrap(), "--output-dir", dir.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = summary(&dir);
    assert!(rows.iter().all(|r| r.len() == 11));
    assert_eq!(rows[2][4], "mixed(prox-linear,exact)");
    let slope = |i: usize| -> f64 { rows[i][8].parse().unwrap() };
    assert!(slope(1) <= -1.8, "accelerated slope {}", slope(1));
    assert!(slope(2) < 0.0);
    assert!(slope(1) < slope(2));
}

#[test]
fn config_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let q = write_config(
        tmp.path(),
        "q.cfg",
        "run.a.model = {\"family\": \"lasso\", \"rows\": 5, \"cols\": 5}\nrun.a.rule = \"gauss-southwell\"\nrun.a.q = 1.5\n",
    );
    let out = bsum(&["run", q.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 3: run.a.q: q must lie in (0,1]"), "{}", stderr(&out));

    let ec = write_config(
        tmp.path(),
        "ec.cfg",
        "run.a.model = {\"family\": \"lasso\", \"rows\": 5, \"cols\": 3}\nrun.a.rule = \"essentially-cyclic\"\nrun.a.period_map = [[0], [1]]\n",
    );
    let out = bsum(&["run", ec.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("does not cover block(s) 2"), "{}", stderr(&out));

    let syntax = write_config(tmp.path(), "s.cfg", "seed = 1\nrun.a.model {}\n");
    let out = bsum(&["run", syntax.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let out = bsum(&["run", tmp.path().join("missing.cfg").to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
}

#[test]
fn run_failure_exits_2_and_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    // Logistic blocks have no exact solver, which the accelerated method needs.
    let cfg = write_config(
        tmp.path(),
        "f.cfg",
        r#"
output_dir = "out"
run.bad.model = {"family": "logistic", "rows": 20, "cols": 4, "block_size": 2}
run.bad.method = "a2bsum"
run.good.model = {"family": "l2-svm", "rows": 20, "cols": 4}
run.good.iterations = 30
"#,
    );
    let out = bsum(&["run", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let rows = summary(&tmp.path().join("out"));
    assert!(rows[1][10].starts_with("error:"), "{:?}", rows[1]);
    assert_eq!(rows[2][10], "ok");
}

#[test]
fn certify_recorded_and_tampered_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.cfg",
        r#"
output_dir = "out"
run.gs.model = {"family": "lasso", "rows": 20, "cols": 50, "block_size": 5}
run.gs.iterations = 60
"#,
    );
    assert_eq!(code(&bsum(&["run", cfg.to_str().unwrap()], &[])), 0);
    let trace = tmp.path().join("out/gs.trace.csv");
    let json = tmp.path().join("cert.json");
    let out = bsum(&["certify", trace.to_str().unwrap(), cfg.to_str().unwrap(), "-o", json.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(rep["all_checks_pass"], Value::Bool(true));
    assert!(rep["checks"]["descent"].as_array().unwrap().iter().any(|r| r["id"] == "descent-gs-ec"));

    // Raise f at one iterate: the descent inequality into it must fail.
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut fields: Vec<String> = lines[6].split(',').map(str::to_string).collect();
    let f: f64 = fields[1].parse().unwrap();
    fields[1] = format!("{:.16e}", f + 10.0);
    lines[6] = fields.join(",");
    let bad = tmp.path().join("bad.trace.csv");
    fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let out = bsum(&["certify", bad.to_str().unwrap(), cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["any_violated"], Value::Bool(true));

    let out = bsum(&["certify", cfg.to_str().unwrap(), cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
}

#[test]
fn compare_aligns_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "exp.cfg", TWO_RUN);
    assert_eq!(code(&bsum(&["run", cfg.to_str().unwrap()], &[])), 0);
    let a = tmp.path().join("out/bcpg.trace.csv");
    let b = tmp.path().join("out/bcm.trace.csv");
    let out = bsum(&["compare", b.to_str().unwrap(), a.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "r,bcm,bcpg");
    assert_eq!(lines.len(), 1 + 101);
    assert!(lines[101].starts_with("100,,"));
    assert_eq!(lines[10].split(',').count(), 3);

    let out = bsum(&["compare", a.to_str().unwrap(), a.to_str().unwrap()], &[]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("r,bcpg,bcpg_2\n"));
    assert!(text.lines().skip(1).all(|l| {
        let f: Vec<&str> = l.split(',').collect();
        f[1] == f[2]
    }));

    let out = bsum(&["compare", a.to_str().unwrap(), cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
}

#[test]
fn generated_instance_matches_seeded_run() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("svm.txt");
    let out = bsum(&["gen", "l2-svm", "rows=30", "cols=6", "--seed", "8", "-o", file.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cfg = write_config(
        tmp.path(),
        "g.cfg",
        r#"
output_dir = "out"
run.file.model = {"family": "l2-svm", "rows": 30, "cols": 6}
run.file.instance = "svm.txt"
run.file.iterations = 40
run.seeded.model = {"family": "l2-svm", "rows": 30, "cols": 6}
run.seeded.seed = 8
run.seeded.iterations = 40
"#,
    );
    let out = bsum(&["run", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let dir = tmp.path().join("out");
    assert_eq!(fs::read(dir.join("file.trace.csv")).unwrap(), fs::read(dir.join("seeded.trace.csv")).unwrap());

    let out = bsum(&["gen", "l2-svm", "rows=30", "-o", file.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
}
