//! Search frameworks that host an externally supplied heuristic.
//!
//! A heuristic plugs in through [`Heuristic`]: step-by-step construction asks
//! for one score per feasible candidate at every step, while ACO and GLS ask
//! once per instance for a knowledge array (edge matrix or item vector).

pub mod aco;
pub mod constructive;
pub mod gls;

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, InstanceData};
use crate::matrix::Matrix;
use crate::{Framework, Problem, ProblemError, Solution};

pub use aco::{aco_run, AcoParams};
pub use constructive::{
    baseline_best_fit, baseline_first_fit, constructive_solve, nearest_neighbor_tour, ConstructionView,
    NearestNeighbor, ValueDensity,
};
pub use gls::{gls_lambda, gls_run, gls_run_observed, GlsParams, PenaltyState};

/// Failure raised by a heuristic while it was being called.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeuristicFault {
    #[error("heuristic raised an error: {0}")]
    Runtime(String),
    #[error("heuristic exceeded its time limit")]
    Timeout,
    #[error("heuristic output rejected: {0}")]
    InvalidOutput(String),
}

#[derive(Debug, Error)]
pub enum FrameworkError {
    #[error(transparent)]
    Heuristic(#[from] HeuristicFault),
    #[error("time limit reached")]
    Timeout,
    #[error("no feasible candidate: {0}")]
    NoFeasibleCandidate(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

impl FrameworkError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::Heuristic(HeuristicFault::InvalidOutput(msg.into()))
    }
}

/// Optional wall-clock cut-off shared by every runner.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn none() -> Self {
        Self(None)
    }

    pub fn at(instant: Instant) -> Self {
        Self(Some(instant))
    }

    pub fn after(limit: Duration) -> Self {
        Self(Instant::now().checked_add(limit))
    }

    pub fn instant(&self) -> Option<Instant> {
        self.0
    }

    pub fn expired(&self) -> bool {
        self.0.is_some_and(|t| Instant::now() >= t)
    }

    pub fn check(&self) -> Result<(), FrameworkError> {
        if self.expired() {
            Err(FrameworkError::Timeout)
        } else {
            Ok(())
        }
    }

    /// The earlier of two deadlines.
    pub fn min(self, other: Deadline) -> Deadline {
        match (self.0, other.0) {
            (Some(a), Some(b)) => Deadline(Some(a.min(b))),
            (a, b) => Deadline(a.or(b)),
        }
    }
}

/// Shape of the value a heuristic must return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputShape {
    /// One finite score per candidate, aligned with the candidate list.
    CandidateScores,
    /// A square matrix over the instance's nodes or items.
    SquareMatrix,
    /// One value per item.
    ItemVector,
}

/// Entry point a heuristic must define for one (framework, problem) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HeuristicSignature {
    pub framework: Framework,
    pub problem: Problem,
    pub function_name: &'static str,
    pub params: &'static [&'static str],
    pub output: OutputShape,
}

impl HeuristicSignature {
    /// `name(a, b, c)`.
    pub fn call_form(&self) -> String {
        format!("{}({})", self.function_name, self.params.join(", "))
    }
}

impl fmt::Display for HeuristicSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}: {}", self.framework, self.problem, self.call_form())
    }
}

const SIGNATURES: [HeuristicSignature; 9] = [
    HeuristicSignature {
        framework: Framework::Constructive,
        problem: Problem::Tsp,
        function_name: "select_next_node",
        params: &["current_node", "destination_node", "unvisited_nodes", "distance_matrix"],
        output: OutputShape::CandidateScores,
    },
    HeuristicSignature {
        framework: Framework::Constructive,
        problem: Problem::Kp,
        function_name: "select_next_item",
        params: &["remaining_capacity", "weights", "values", "candidates"],
        output: OutputShape::CandidateScores,
    },
    HeuristicSignature {
        framework: Framework::Constructive,
        problem: Problem::BppOnline,
        function_name: "priority",
        params: &["item", "bins_remain_cap"],
        output: OutputShape::CandidateScores,
    },
    HeuristicSignature {
        framework: Framework::Aco,
        problem: Problem::Tsp,
        function_name: "heuristics",
        params: &["distance_matrix"],
        output: OutputShape::SquareMatrix,
    },
    HeuristicSignature {
        framework: Framework::Aco,
        problem: Problem::Cvrp,
        function_name: "heuristics",
        params: &["distance_matrix", "coordinates", "demands", "capacity"],
        output: OutputShape::SquareMatrix,
    },
    HeuristicSignature {
        framework: Framework::Aco,
        problem: Problem::Mkp,
        function_name: "heuristics",
        params: &["prize", "weight"],
        output: OutputShape::ItemVector,
    },
    HeuristicSignature {
        framework: Framework::Aco,
        problem: Problem::Op,
        function_name: "heuristics",
        params: &["prize", "distance", "maxlen"],
        output: OutputShape::SquareMatrix,
    },
    HeuristicSignature {
        framework: Framework::Aco,
        problem: Problem::BppOffline,
        function_name: "heuristics",
        params: &["demand", "capacity"],
        output: OutputShape::SquareMatrix,
    },
    HeuristicSignature {
        framework: Framework::Gls,
        problem: Problem::Tsp,
        function_name: "heuristics",
        params: &["distance_matrix"],
        output: OutputShape::SquareMatrix,
    },
];

/// Every benchmarked (framework, problem) pair's signature.
pub fn signatures() -> &'static [HeuristicSignature] {
    &SIGNATURES
}

pub fn signature_for(framework: Framework, problem: Problem) -> Result<&'static HeuristicSignature, ProblemError> {
    SIGNATURES
        .iter()
        .find(|s| s.framework == framework && s.problem == problem)
        .ok_or(ProblemError::UnsupportedPair { framework, problem })
}

/// Inputs handed to a knowledge heuristic (ACO and GLS).
#[derive(Debug, Clone, Copy)]
pub enum KnowledgeInput<'a> {
    Tsp { distance_matrix: &'a Matrix },
    Cvrp { distance_matrix: &'a Matrix, coordinates: &'a [[f64; 2]], demands: &'a [u32], capacity: f64 },
    Mkp { prize: &'a [f64], weight: &'a Matrix },
    Op { prize: &'a [f64], distance: &'a Matrix, maxlen: f64 },
    Bpp { demand: &'a [u32], capacity: u32 },
}

impl<'a> KnowledgeInput<'a> {
    pub fn from_instance(instance: &'a Instance) -> Self {
        match &instance.data {
            InstanceData::Tsp(t) => Self::Tsp { distance_matrix: &t.dist },
            InstanceData::Cvrp(c) => Self::Cvrp {
                distance_matrix: &c.dist,
                coordinates: &c.coords,
                demands: &c.demands,
                capacity: c.capacity,
            },
            InstanceData::Mkp(m) => Self::Mkp { prize: &m.values, weight: &m.weights },
            InstanceData::Op(o) => Self::Op { prize: &o.prizes, distance: &o.dist, maxlen: o.budget },
            InstanceData::Bpp(b) => Self::Bpp { demand: &b.sizes, capacity: b.capacity },
            InstanceData::Kp(_) => unreachable!("KP is only hosted by the constructive framework"),
        }
    }

    /// Expected output length (vector) or side length (matrix).
    pub fn expected_len(&self) -> usize {
        match self {
            Self::Tsp { distance_matrix } | Self::Cvrp { distance_matrix, .. } => distance_matrix.rows(),
            Self::Mkp { prize, .. } | Self::Op { prize, .. } => prize.len(),
            Self::Bpp { demand, .. } => demand.len(),
        }
    }
}

/// Value returned by a knowledge heuristic.
#[derive(Debug, Clone, PartialEq)]
pub enum Knowledge {
    Matrix(Matrix),
    Vector(Vec<f64>),
}

/// A heuristic pluggable into the frameworks. Implementors provide whichever
/// of the two calls their signature uses.
pub trait Heuristic {
    /// Scores the feasible candidates of one construction step.
    fn scores(&mut self, view: &ConstructionView<'_>) -> Result<Vec<f64>, HeuristicFault> {
        let _ = view;
        Err(HeuristicFault::Runtime("heuristic does not support construction".into()))
    }

    /// Produces the knowledge array for one instance.
    fn knowledge(&mut self, input: &KnowledgeInput<'_>) -> Result<Knowledge, HeuristicFault> {
        let _ = input;
        Err(HeuristicFault::Runtime("heuristic does not produce knowledge arrays".into()))
    }
}

fn inverse(d: f64) -> f64 {
    if d > 0.0 {
        1.0 / d
    } else {
        0.0
    }
}

/// Classical knowledge arrays used by the ACO and GLS baselines: inverse
/// distance (TSP, CVRP), prize over distance (OP), value over total weight
/// (MKP), item size over capacity (offline BPP), and the distance matrix
/// itself for GLS.
#[derive(Debug, Clone, Copy)]
pub struct ClassicKnowledge {
    pub framework: Framework,
}

impl Heuristic for ClassicKnowledge {
    fn knowledge(&mut self, input: &KnowledgeInput<'_>) -> Result<Knowledge, HeuristicFault> {
        let n = input.expected_len();
        Ok(match (*input, self.framework) {
            (KnowledgeInput::Tsp { distance_matrix }, Framework::Gls) => Knowledge::Matrix(distance_matrix.clone()),
            (KnowledgeInput::Tsp { distance_matrix: d } | KnowledgeInput::Cvrp { distance_matrix: d, .. }, _) => {
                Knowledge::Matrix(Matrix::from_fn(n, n, |i, j| inverse(d.get(i, j))))
            }
            (KnowledgeInput::Op { prize, distance, .. }, _) => {
                Knowledge::Matrix(Matrix::from_fn(n, n, |i, j| prize[j] * inverse(distance.get(i, j))))
            }
            (KnowledgeInput::Mkp { prize, weight }, _) => {
                Knowledge::Vector((0..n).map(|i| prize[i] * inverse(weight.row(i).iter().sum())).collect())
            }
            (KnowledgeInput::Bpp { demand, capacity }, _) => {
                Knowledge::Matrix(Matrix::from_fn(n, n, |_, j| f64::from(demand[j]) / f64::from(capacity)))
            }
        })
    }
}

/// Framework hyperparameters for one (framework, problem) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "framework", rename_all = "snake_case")]
pub enum FrameworkParams {
    Constructive,
    Aco(AcoParams),
    Gls(GlsParams),
}

impl FrameworkParams {
    pub fn framework(&self) -> Framework {
        match self {
            Self::Constructive => Framework::Constructive,
            Self::Aco(_) => Framework::Aco,
            Self::Gls(_) => Framework::Gls,
        }
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        match self {
            Self::Constructive => Ok(()),
            Self::Aco(p) => p.validate(),
            Self::Gls(p) => p.validate(),
        }
    }
}

/// Default hyperparameters of every benchmarked pair. Construction has none.
pub fn framework_defaults(framework: Framework, problem: Problem) -> Result<FrameworkParams, ProblemError> {
    signature_for(framework, problem)?;
    Ok(match framework {
        Framework::Constructive => FrameworkParams::Constructive,
        Framework::Gls => FrameworkParams::Gls(GlsParams::default()),
        Framework::Aco => {
            let (ants, iterations) = match problem {
                Problem::Tsp | Problem::Cvrp => (30, 100),
                Problem::Mkp => (10, 50),
                Problem::Op => (20, 50),
                Problem::BppOffline => (20, 15),
                _ => unreachable!("signature lookup already rejected {problem}"),
            };
            FrameworkParams::Aco(AcoParams { n_ants: ants, n_iterations: iterations, ..AcoParams::default() })
        }
    })
}

/// Result of one framework run on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub solution: Solution,
    /// Best objective after each iteration (ACO, GLS) or a single point (construction).
    pub curve: Vec<f64>,
}

/// Runs `heuristic` inside the framework described by `params` on one instance.
pub fn run_framework(
    instance: &Instance,
    heuristic: &mut dyn Heuristic,
    params: &FrameworkParams,
    seed: u64,
    deadline: Deadline,
) -> Result<RunOutcome, FrameworkError> {
    let framework = params.framework();
    signature_for(framework, instance.problem())?;
    params.validate()?;
    match params {
        FrameworkParams::Constructive => {
            let solution = constructive_solve(instance, heuristic, None, deadline)?;
            let curve = vec![solution.objective];
            Ok(RunOutcome { solution, curve })
        }
        FrameworkParams::Aco(p) => {
            let input = KnowledgeInput::from_instance(instance);
            let eta = heuristic.knowledge(&input)?;
            deadline.check()?;
            aco_run(instance, &eta, p, seed, deadline)
        }
        FrameworkParams::Gls(p) => {
            let InstanceData::Tsp(tsp) = &instance.data else {
                return Err(ProblemError::UnsupportedPair { framework, problem: instance.problem() }.into());
            };
            let eta = heuristic.knowledge(&KnowledgeInput::Tsp { distance_matrix: &tsp.dist })?;
            let Knowledge::Matrix(eta) = eta else {
                return Err(FrameworkError::invalid("GLS expects a matrix"));
            };
            deadline.check()?;
            gls_run(tsp, &eta, p, seed, deadline)
        }
    }
}

/// Cost under the minimization convention: objective for minimization
/// problems, negated reward for maximization problems.
pub fn cost_of(problem: Problem, objective: f64) -> f64 {
    if problem.is_maximization() {
        -objective
    } else {
        objective
    }
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<(), FrameworkError> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(FrameworkError::invalid(format!("{what} contains non-finite value {v}"))),
        None => Ok(()),
    }
}

/// Checks that a knowledge array is finite and non-negative.
pub(crate) fn check_knowledge(values: &[f64], what: &str) -> Result<(), FrameworkError> {
    check_finite(values, what)?;
    if let Some(v) = values.iter().find(|&&v| v < 0.0) {
        return Err(FrameworkError::invalid(format!("{what} contains negative value {v}")));
    }
    Ok(())
}
