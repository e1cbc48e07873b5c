use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ProblemError;

/// The benchmark combinatorial optimization problems.
///
/// Bin packing appears twice because its offline and online variants are
/// hosted by different frameworks and use different instance distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Tsp,
    Kp,
    Cvrp,
    Mkp,
    Op,
    BppOffline,
    BppOnline,
}

impl Problem {
    pub const ALL: [Problem; 7] =
        [Problem::Tsp, Problem::Kp, Problem::Cvrp, Problem::Mkp, Problem::Op, Problem::BppOffline, Problem::BppOnline];

    pub fn name(self) -> &'static str {
        match self {
            Problem::Tsp => "tsp",
            Problem::Kp => "kp",
            Problem::Cvrp => "cvrp",
            Problem::Mkp => "mkp",
            Problem::Op => "op",
            Problem::BppOffline => "bpp-offline",
            Problem::BppOnline => "bpp-online",
        }
    }

    /// Whether the native objective is maximized (rewards) rather than minimized.
    pub fn is_maximization(self) -> bool {
        matches!(self, Problem::Kp | Problem::Mkp | Problem::Op)
    }

    /// Smallest instance size accepted by the generator.
    pub fn min_size(self) -> usize {
        match self {
            Problem::Tsp | Problem::Op => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Problem::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| ProblemError::UnknownProblem(s.to_string()))
    }
}

/// The search frameworks that host an evolved heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Framework {
    Constructive,
    Aco,
    Gls,
}

impl Framework {
    pub const ALL: [Framework; 3] = [Framework::Constructive, Framework::Aco, Framework::Gls];

    pub fn name(self) -> &'static str {
        match self {
            Framework::Constructive => "constructive",
            Framework::Aco => "aco",
            Framework::Gls => "gls",
        }
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Framework {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Framework::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| ProblemError::UnknownFramework(s.to_string()))
    }
}
