//! Benchmark problems, seeded instance generators and the three search
//! frameworks (step-by-step construction, ACO, GLS) that host heuristics.

pub mod dataset;
pub mod frameworks;
pub mod instance;
pub mod io;
pub mod matrix;
pub mod parallel;
mod problem;
pub mod record;
pub mod solution;

pub use instance::{bpp_lower_bound, gen_instance, Instance, InstanceData, Overrides};
pub use matrix::Matrix;
pub use problem::{Framework, Problem};
pub use solution::{verify_solution, FeasibilityReport, Payload, Solution};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("unknown framework `{0}`")]
    UnknownFramework(String),
    #[error("override `{key}` is not defined for {problem}")]
    InvalidOverride { problem: Problem, key: String },
    #[error("invalid override value `{0}`")]
    InvalidOverrideValue(String),
    #[error("unknown override key `{0}`")]
    UnknownOverrideKey(String),
    #[error("{problem} needs n >= {min}, got {n}")]
    SizeTooSmall { problem: Problem, n: usize, min: usize },
    #[error("no published OP budget for n = {n}; pass budget=<value>")]
    MissingBudget { n: usize },
    #[error("item {item} of size {size} exceeds capacity {capacity}")]
    ItemExceedsCapacity { item: usize, size: u32, capacity: u32 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{framework} does not host {problem}")]
    UnsupportedPair { framework: Framework, problem: Problem },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ProblemError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn format(path: &std::path::Path, reason: impl std::fmt::Display) -> Self {
        Self::Format { path: path.display().to_string(), reason: reason.to_string() }
    }
}
