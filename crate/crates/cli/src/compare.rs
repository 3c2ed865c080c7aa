//! Aligns the optimality gaps of several traces on the iteration index.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use bsum_core::trace::{format_float, parse_csv};

use crate::error::{CliError, Result};
use crate::fsutil::read;

/// Column label per trace: the file stem, suffixed when repeated.
fn labels(paths: &[&Path]) -> Vec<String> {
    let mut used: BTreeMap<String, usize> = BTreeMap::new();
    paths
        .iter()
        .map(|p| {
            let stem = p.file_name().and_then(|s| s.to_str()).unwrap_or("trace");
            let stem = stem.strip_suffix(".csv").unwrap_or(stem);
            let stem = stem.strip_suffix(".trace").unwrap_or(stem).to_string();
            let n = used.entry(stem.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                stem
            } else {
                format!("{stem}_{n}")
            }
        })
        .collect()
}

/// `r` followed by one gap column per trace. Rows cover every `r` present in
/// any trace; missing values are blank.
pub fn compare_texts(labels: &[String], texts: &[String]) -> std::result::Result<String, (usize, String)> {
    let mut columns: Vec<BTreeMap<usize, Option<f64>>> = Vec::with_capacity(texts.len());
    let mut rows = BTreeSet::new();
    for (i, t) in texts.iter().enumerate() {
        let recs = parse_csv(t).map_err(|e| (i, e.to_string()))?;
        let col: BTreeMap<usize, Option<f64>> = recs.iter().map(|r| (r.r, r.delta)).collect();
        rows.extend(col.keys().copied());
        columns.push(col);
    }
    let mut out = String::from("r");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_string());
        for col in &columns {
            out.push(',');
            if let Some(Some(d)) = col.get(&r) {
                out.push_str(&format_float(*d));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn compare(paths: &[&Path]) -> Result<String> {
    if paths.is_empty() {
        return Err(CliError::Input("compare needs at least one trace".into()));
    }
    let texts = paths.iter().map(|p| read(p).map_err(|e| CliError::Input(e.to_string()))).collect::<Result<Vec<_>>>()?;
    compare_texts(&labels(paths), &texts).map_err(|(i, msg)| CliError::Input(format!("{}: {msg}", paths[i].display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use bsum_core::engine::IterationRecord;
    use bsum_core::trace::records_to_csv;

    fn trace(n: usize, scale: f64) -> String {
        let recs: Vec<IterationRecord<f64>> = (0..n)
            .map(|r| IterationRecord { delta: Some(scale / (r + 1) as f64), ..IterationRecord::terminal(r, 1.0) })
            .collect();
        records_to_csv(&recs)
    }

    #[test]
    fn aligned_with_blank_tails() {
        let out = compare_texts(&["a".into(), "b".into()], &[trace(50, 1.0), trace(100, 2.0)]).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "r,a,b");
        assert_eq!(lines.len(), 101);
        assert!(lines[100].starts_with("99,,"));
        assert_eq!(lines[1].split(',').count(), 3);
    }

    #[test]
    fn self_compare_duplicates_column() {
        let t = trace(10, 1.0);
        let out = compare_texts(&["x".into(), "x_2".into()], &[t.clone(), t]).unwrap();
        for line in out.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f[1], f[2]);
        }
    }

    #[test]
    fn labels_unique() {
        let a = Path::new("runs/gs.trace.csv");
        let b = Path::new("other/gs.trace.csv");
        assert_eq!(labels(&[a, b]), ["gs", "gs_2"]);
    }

    #[test]
    fn malformed_trace_names_index() {
        let err = compare_texts(&["a".into(), "b".into()], &[trace(3, 1.0), "r,f\n1,2\n".into()]).unwrap_err();
        assert_eq!(err.0, 1);
    }
}
