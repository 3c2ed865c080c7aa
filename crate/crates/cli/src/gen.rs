//! Seeded instance files.

use bsum_core::linalg::DenseMatrix;
use bsum_core::models::io::write_matrices;
use bsum_core::models::{generate_data, ModelSpec};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

/// `key=value` parameters into a model spec; values are JSON, bare words are
/// taken as strings.
pub fn parse_model(family: &str, params: &[String]) -> Result<ModelSpec> {
    let mut obj = Map::new();
    obj.insert("family".into(), Value::String(family.into()));
    for p in params {
        let (k, v) = p.split_once('=').ok_or_else(|| CliError::Input(format!("parameter '{p}' is not key=value")))?;
        let v = serde_json::from_str(v.trim()).unwrap_or_else(|_| Value::String(v.trim().into()));
        if obj.insert(k.trim().into(), v).is_some() {
            return Err(CliError::Input(format!("parameter '{}' given twice", k.trim())));
        }
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::Input(format!("{family}: {e}")))
}

/// The instance file text, with a comment header naming the model and seed.
pub fn generate(spec: &ModelSpec, seed: u64) -> Result<String> {
    let mats: Vec<DenseMatrix<f64>> = generate_data(spec, seed).map_err(|e| CliError::Input(e.to_string()))?;
    let refs: Vec<&DenseMatrix<f64>> = mats.iter().collect();
    let json = serde_json::to_string(spec).map_err(|e| CliError::Run(e.to_string()))?;
    Ok(format!("# model {json}\n# seed {seed}\n{}", write_matrices(&refs)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use bsum_core::models::io::read_matrices;

    #[test]
    fn params_parse_strictly() {
        let spec = parse_model("lasso", &["rows=4".into(), "cols=6".into(), "block_size=2".into()]).unwrap();
        assert_eq!(spec, ModelSpec::Lasso { rows: 4, cols: 6, density: 0.2, lambda_ratio: 0.1, block_size: 2 });
        assert!(parse_model("lasso", &["rows=4".into()]).is_err());
        assert!(parse_model("lasso", &["rows=4".into(), "cols=6".into(), "colour=red".into()]).is_err());
        assert!(parse_model("lasso", &["rows".into()]).is_err());
    }

    #[test]
    fn file_reads_back() {
        let spec = parse_model("group-lasso", &["rows=6".into(), "groups=3".into(), "group_size=2".into(), "rank=1".into()]).unwrap();
        let text = generate(&spec, 5).unwrap();
        assert!(text.starts_with("# model {\"family\":\"group-lasso\""));
        assert_eq!(read_matrices::<f64>(&text).unwrap().len(), 4);
    }
}
