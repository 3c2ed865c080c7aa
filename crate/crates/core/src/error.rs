use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BsumError {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("block index {index} out of range for {blocks} blocks")]
    BlockIndex { index: usize, blocks: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("malformed instance file: {0}")]
    Instance(String),
}

pub type Result<T, E = BsumError> = std::result::Result<T, E>;
