//! Sandboxed evaluation of heuristic programs written in Rhai.
//!
//! A program defines the entry function of its (framework, problem)
//! signature. [`sandbox_check`] rejects constructs outside the allowlist
//! (see `ALLOWLIST.md`), and [`evaluate`] runs the program inside its
//! framework on a dataset to produce a [`FitnessReport`].

mod check;
mod classic;
mod engine;
mod evaluate;
mod fitness;
mod program;

pub use check::{sandbox_check, Category, CheckReport, ParseFailure, Violation, DENYLIST};
pub use classic::classic_program;
pub use engine::{build_engine, Mat, Row, Watchdog, MAX_ARRAY_SIZE, MAX_CALL_LEVELS};
pub use evaluate::{evaluate, evaluate_many, EvalConfig, DEFAULT_TIME_LIMIT, MIN_INSTANCE_SECONDS};
pub use fitness::{EvalStatus, Fitness, FitnessReport};
pub use program::HeuristicProgram;

use pathwise_problems::ProblemError;

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("malformed heuristic header `{0}` (expected framework/problem)")]
    Header(String),
    #[error("heuristic file has no `// pathwise-heuristic:` header and no pair was given")]
    MissingHeader,
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}
