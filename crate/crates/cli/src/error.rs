use std::path::Path;

use bsum_core::BsumError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: line {line}: {msg}")]
    Syntax { path: String, line: usize, msg: String },

    /// A well-formed entry with an unacceptable value.
    #[error("{path}: line {line}: {field}: {msg}")]
    Field { path: String, line: usize, field: String, msg: String },

    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Run(String),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 1 for bad configuration or input files, 2 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Syntax { .. } | CliError::Field { .. } | CliError::Input(_) => 1,
            CliError::Run(_) | CliError::Io { .. } => 2,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

impl From<BsumError> for CliError {
    fn from(e: BsumError) -> Self {
        CliError::Run(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
