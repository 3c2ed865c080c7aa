//! Trace CSV serialization.
//!
//! Header `r,f,delta,step_sq,virt_step_sq,grad_diff_sq,blocks,descent_slack`;
//! statistics that were not computed are empty, `blocks` is `;`-separated
//! and 0-based, floats carry 17 significant digits.

use std::fmt::Write as _;

use crate::engine::{IterationRecord, Trace};
use crate::error::{BsumError, Result};
use crate::scalar::Scalar;

pub const CSV_HEADER: &str = "r,f,delta,step_sq,virt_step_sq,grad_diff_sq,blocks,descent_slack";

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn opt<F: Scalar>(v: Option<F>) -> String {
    v.map(|x| format_float(x.to_f64_lossy())).unwrap_or_default()
}

pub fn to_csv<F: Scalar>(trace: &Trace<F>) -> String {
    records_to_csv(&trace.records)
}

pub fn records_to_csv<F: Scalar>(records: &[IterationRecord<F>]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for rec in records {
        let blocks: Vec<String> = rec.blocks.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            rec.r,
            format_float(rec.f.to_f64_lossy()),
            opt(rec.delta),
            opt(rec.step_sq),
            opt(rec.virt_step_sq),
            opt(rec.grad_diff_sq),
            blocks.join(";"),
            opt(rec.descent_slack)
        );
    }
    out
}

fn parse_opt(field: &str, line: usize, name: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse::<f64>().map(Some).map_err(|_| BsumError::Trace(format!("line {line}: bad {name} value '{field}'")))
}

/// Parses a trace CSV back into records (auxiliary statistics are not stored).
pub fn parse_csv(text: &str) -> Result<Vec<IterationRecord<f64>>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| BsumError::Trace("empty trace file".into()))?;
    if header.trim() != CSV_HEADER {
        return Err(BsumError::Trace(format!("unexpected header '{}'", header.trim())));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 8 {
            return Err(BsumError::Trace(format!("line {n}: expected 8 fields, found {}", fields.len())));
        }
        let r = fields[0].parse::<usize>().map_err(|_| BsumError::Trace(format!("line {n}: bad iteration index '{}'", fields[0])))?;
        let f = parse_opt(fields[1], n, "f")?.ok_or_else(|| BsumError::Trace(format!("line {n}: missing f")))?;
        let blocks = if fields[6].is_empty() {
            Vec::new()
        } else {
            fields[6]
                .split(';')
                .map(|b| b.parse::<usize>().map_err(|_| BsumError::Trace(format!("line {n}: bad block index '{b}'"))))
                .collect::<Result<Vec<_>>>()?
        };
        out.push(IterationRecord {
            r,
            f,
            delta: parse_opt(fields[2], n, "delta")?,
            step_sq: parse_opt(fields[3], n, "step_sq")?,
            virt_step_sq: parse_opt(fields[4], n, "virt_step_sq")?,
            grad_diff_sq: parse_opt(fields[5], n, "grad_diff_sq")?,
            aux_step_sq: None,
            blocks,
            descent_slack: parse_opt(fields[7], n, "descent_slack")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let rec = IterationRecord {
            r: 3,
            f: 0.1 + 0.2,
            delta: Some(1.0 / 3.0),
            step_sq: None,
            virt_step_sq: Some(2.5e-17),
            grad_diff_sq: None,
            aux_step_sq: None,
            blocks: vec![0, 2],
            descent_slack: Some(-0.0),
        };
        let text = records_to_csv(&[rec.clone()]);
        assert!(text.starts_with(CSV_HEADER));
        let back = parse_csv(&text).unwrap();
        assert_eq!(back, vec![rec]);
    }

    #[test]
    fn malformed() {
        assert!(parse_csv("").is_err());
        assert!(parse_csv("a,b\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,2,3\n")).is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,x,,,,,,\n")).is_err());
    }
}
