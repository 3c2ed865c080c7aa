//! Batch front end for BSUM experiments: configuration parsing, parallel
//! runs with reference solutions and diagnostic suites, trace comparison and
//! instance generation.

pub mod certify;
pub mod compare;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fsutil;
pub mod gen;

pub use config::{parse_config, ExperimentSpec, RunSpec};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, ExperimentOutcome};
