//! The `pathwise` command line: dataset generation, classical baselines,
//! evolution runs, test-set evaluation of saved heuristics and run reports.
//!
//! Exit codes: 0 success, 2 validation error (nothing was written), 3 runtime
//! failure.

mod commands;
pub mod report;

pub use commands::{run, Baseline, Cli, Command, Evaluate, Evolve, GenData, Report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}
