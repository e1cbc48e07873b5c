use std::sync::Arc;
use std::time::{Duration, Instant};

use pathwise_problems::frameworks::{
    cost_of, framework_defaults, run_framework, ConstructionView, Deadline, FrameworkError, FrameworkParams, Heuristic,
    HeuristicFault, HeuristicSignature, Knowledge, KnowledgeInput, OutputShape,
};
use pathwise_problems::parallel::{map_ordered, Execution};
use pathwise_problems::{verify_solution, Framework, Instance, Matrix, Problem, ProblemError};
use rhai::{Array, CallFnOptions, Dynamic, Engine, EvalAltResult, Scope, AST, FLOAT, INT};
use serde::{Deserialize, Serialize};

use crate::check::sandbox_check;
use crate::engine::{build_engine, Mat, Watchdog};
use crate::fitness::{EvalStatus, Fitness, FitnessReport};
use crate::program::HeuristicProgram;

/// Default per-heuristic wall-clock budget in seconds.
pub const DEFAULT_TIME_LIMIT: f64 = 60.0;
/// Lower bound of the per-instance share of the budget.
pub const MIN_INSTANCE_SECONDS: f64 = 1.0;

/// Framework hyperparameters and wall-clock budget for an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub params: FrameworkParams,
    /// Total seconds for the whole dataset.
    pub time_limit: f64,
}

impl EvalConfig {
    pub fn new(params: FrameworkParams, time_limit: f64) -> Self {
        Self { params, time_limit }
    }

    /// Default hyperparameters for the pair with the default time limit.
    pub fn defaults(framework: Framework, problem: Problem) -> Result<Self, ProblemError> {
        Ok(Self::new(framework_defaults(framework, problem)?, DEFAULT_TIME_LIMIT))
    }

    /// `max(time_limit / |D|, 1 s)`.
    pub fn instance_limit(&self, dataset_len: usize) -> Duration {
        let share = self.time_limit / dataset_len.max(1) as f64;
        Duration::from_secs_f64(share.max(MIN_INSTANCE_SECONDS))
    }
}

fn floats(values: impl IntoIterator<Item = f64>) -> Array {
    values.into_iter().map(Dynamic::from_float).collect()
}

fn ints(values: &[usize]) -> Array {
    values.iter().map(|&v| Dynamic::from_int(v as INT)).collect()
}

fn number(value: &Dynamic) -> Option<f64> {
    value.as_float().ok().or_else(|| value.as_int().ok().map(|v| v as FLOAT))
}

fn to_vector(value: &Dynamic, len: usize, what: &str) -> Result<Vec<f64>, HeuristicFault> {
    let array = value.read_lock::<Array>().ok_or_else(|| {
        HeuristicFault::InvalidOutput(format!("{what}: expected an array, got {}", value.type_name()))
    })?;
    if array.len() != len {
        return Err(HeuristicFault::InvalidOutput(format!("{what}: expected {len} values, got {}", array.len())));
    }
    let out = array
        .iter()
        .map(|v| number(v).ok_or_else(|| HeuristicFault::InvalidOutput(format!("{what}: non-numeric entry {v}"))))
        .collect::<Result<Vec<_>, _>>()?;
    match out.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(HeuristicFault::InvalidOutput(format!("{what}: non-finite value {v}"))),
        None => Ok(out),
    }
}

fn to_matrix(value: &Dynamic, n: usize) -> Result<Matrix, HeuristicFault> {
    if let Some(mat) = value.read_lock::<Mat>() {
        if mat.0.rows() != n || mat.0.cols() != n {
            return Err(HeuristicFault::InvalidOutput(format!(
                "expected a {n}x{n} matrix, got {}x{}",
                mat.0.rows(),
                mat.0.cols()
            )));
        }
        if !mat.0.all_finite() {
            return Err(HeuristicFault::InvalidOutput("matrix contains non-finite values".into()));
        }
        return Ok((*mat.0).clone());
    }
    let rows = value.read_lock::<Array>().ok_or_else(|| {
        HeuristicFault::InvalidOutput(format!("expected an array of rows, got {}", value.type_name()))
    })?;
    if rows.len() != n {
        return Err(HeuristicFault::InvalidOutput(format!("expected {n} rows, got {}", rows.len())));
    }
    let mut data = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        data.extend(to_vector(row, n, &format!("row {i}"))?);
    }
    Matrix::from_vec(n, n, data).ok_or_else(|| HeuristicFault::InvalidOutput("matrix shape".into()))
}

fn root_cause(err: &EvalAltResult) -> &EvalAltResult {
    match err {
        EvalAltResult::ErrorInFunctionCall(_, _, inner, _) | EvalAltResult::ErrorInModule(_, inner, _) => {
            root_cause(inner)
        }
        other => other,
    }
}

/// Adapts a compiled script to the framework [`Heuristic`] interface for one instance.
struct ScriptHeuristic<'a> {
    engine: &'a Engine,
    ast: &'a AST,
    watchdog: &'a Watchdog,
    deadline: Deadline,
    signature: &'static HeuristicSignature,
    scope: Scope<'static>,
    dist: Option<Dynamic>,
    kp: Option<(Dynamic, Dynamic)>,
}

impl<'a> ScriptHeuristic<'a> {
    fn call(&mut self, args: Vec<Dynamic>) -> Result<Dynamic, HeuristicFault> {
        if self.deadline.expired() {
            return Err(HeuristicFault::Timeout);
        }
        self.watchdog.arm(self.deadline);
        let options = CallFnOptions::new().eval_ast(false).rewind_scope(true);
        let result = self.engine.call_fn_with_options::<Dynamic>(
            options,
            &mut self.scope,
            self.ast,
            self.signature.function_name,
            args,
        );
        self.watchdog.disarm();
        result.map_err(|e| match root_cause(&e) {
            EvalAltResult::ErrorTerminated(..) | EvalAltResult::ErrorTooManyOperations(..) => HeuristicFault::Timeout,
            _ if self.deadline.expired() => HeuristicFault::Timeout,
            _ => HeuristicFault::Runtime(e.to_string()),
        })
    }

    fn mat(m: &Matrix) -> Dynamic {
        Dynamic::from(Mat(Arc::new(m.clone())))
    }

    /// Script view of the construction distance matrix, built once per instance.
    fn dist(&mut self, m: &Matrix) -> Dynamic {
        self.dist.get_or_insert_with(|| Self::mat(m)).clone()
    }
}

impl Heuristic for ScriptHeuristic<'_> {
    fn scores(&mut self, view: &ConstructionView<'_>) -> Result<Vec<f64>, HeuristicFault> {
        let args = match *view {
            ConstructionView::Tsp { current, destination, unvisited, dist } => vec![
                Dynamic::from_int(current as INT),
                Dynamic::from_int(destination as INT),
                Dynamic::from_array(ints(unvisited)),
                self.dist(dist),
            ],
            ConstructionView::Kp { remaining_capacity, weights, values, candidates } => {
                let (w, v) = self
                    .kp
                    .get_or_insert_with(|| {
                        (
                            Dynamic::from_array(floats(weights.iter().copied())),
                            Dynamic::from_array(floats(values.iter().copied())),
                        )
                    })
                    .clone();
                vec![Dynamic::from_float(remaining_capacity), w, v, Dynamic::from_array(ints(candidates))]
            }
            ConstructionView::BppOnline { item, bins } => {
                vec![Dynamic::from_float(f64::from(item)), Dynamic::from_array(floats(bins.iter().copied()))]
            }
        };
        let out = self.call(args)?;
        to_vector(&out, view.candidate_count(), "scores")
    }

    fn knowledge(&mut self, input: &KnowledgeInput<'_>) -> Result<Knowledge, HeuristicFault> {
        let args = match *input {
            KnowledgeInput::Tsp { distance_matrix } => vec![Self::mat(distance_matrix)],
            KnowledgeInput::Cvrp { distance_matrix, coordinates, demands, capacity } => vec![
                Self::mat(distance_matrix),
                Dynamic::from_array(
                    coordinates.iter().map(|c| Dynamic::from_array(floats(c.iter().copied()))).collect(),
                ),
                Dynamic::from_array(floats(demands.iter().map(|&d| f64::from(d)))),
                Dynamic::from_float(capacity),
            ],
            KnowledgeInput::Mkp { prize, weight } => {
                vec![Dynamic::from_array(floats(prize.iter().copied())), Self::mat(weight)]
            }
            KnowledgeInput::Op { prize, distance, maxlen } => {
                vec![
                    Dynamic::from_array(floats(prize.iter().copied())),
                    Self::mat(distance),
                    Dynamic::from_float(maxlen),
                ]
            }
            KnowledgeInput::Bpp { demand, capacity } => vec![
                Dynamic::from_array(floats(demand.iter().map(|&d| f64::from(d)))),
                Dynamic::from_float(f64::from(capacity)),
            ],
        };
        let n = input.expected_len();
        let out = self.call(args)?;
        match self.signature.output {
            OutputShape::SquareMatrix => to_matrix(&out, n).map(Knowledge::Matrix),
            OutputShape::ItemVector => to_vector(&out, n, "knowledge").map(Knowledge::Vector),
            OutputShape::CandidateScores => {
                Err(HeuristicFault::Runtime("construction signature used as knowledge".into()))
            }
        }
    }
}

fn status_of(err: &FrameworkError) -> EvalStatus {
    match err {
        FrameworkError::Heuristic(HeuristicFault::Timeout) | FrameworkError::Timeout => EvalStatus::Timeout,
        FrameworkError::Heuristic(HeuristicFault::InvalidOutput(_)) | FrameworkError::NoFeasibleCandidate(_) => {
            EvalStatus::InvalidOutput
        }
        FrameworkError::Heuristic(HeuristicFault::Runtime(_)) | FrameworkError::Problem(_) => EvalStatus::RuntimeError,
    }
}

/// Evaluates `program` on every instance of `dataset` through its framework.
///
/// Never fails: parse, sandbox, runtime, timeout and shape failures are
/// reported through the status with the sentinel fitness. Sandbox violations
/// count as parse errors. Each instance gets `max(time_limit / |D|, 1 s)`,
/// capped by what remains of the total budget.
pub fn evaluate(program: &HeuristicProgram, dataset: &[Instance], config: &EvalConfig) -> FitnessReport {
    let start = Instant::now();
    let elapsed = || start.elapsed().as_secs_f64();
    let signature = match program.signature() {
        Ok(sig) => sig,
        Err(e) => return FitnessReport::failure(EvalStatus::RuntimeError, e.to_string(), elapsed()),
    };
    if config.params.framework() != program.framework {
        return FitnessReport::failure(
            EvalStatus::RuntimeError,
            format!("program targets {} but the configuration is for {}", program.framework, config.params.framework()),
            elapsed(),
        );
    }
    if let Some(bad) = dataset.iter().find(|i| i.problem() != program.problem) {
        return FitnessReport::failure(
            EvalStatus::RuntimeError,
            format!("program targets {} but instance {} is {}", program.problem, bad.id(), bad.problem()),
            elapsed(),
        );
    }
    if dataset.is_empty() {
        return FitnessReport::failure(EvalStatus::RuntimeError, "empty dataset", elapsed());
    }
    let report = sandbox_check(&program.source, Some(signature));
    if !report.clean() {
        return FitnessReport::failure(EvalStatus::ParseError, report.summary(), elapsed());
    }
    let watchdog = Watchdog::default();
    let engine = build_engine(&watchdog, false);
    let ast = match engine.compile(&program.source) {
        Ok(ast) => ast,
        Err(e) => return FitnessReport::failure(EvalStatus::ParseError, e.to_string(), elapsed()),
    };

    let total = Deadline::after(Duration::from_secs_f64(config.time_limit.max(0.0)));
    let per_instance = config.instance_limit(dataset.len());
    let mut objectives = Vec::with_capacity(dataset.len());
    for instance in dataset {
        let mut heuristic = ScriptHeuristic {
            engine: &engine,
            ast: &ast,
            watchdog: &watchdog,
            deadline: Deadline::after(per_instance).min(total),
            signature,
            scope: Scope::new(),
            dist: None,
            kp: None,
        };
        let deadline = heuristic.deadline;
        let outcome = match run_framework(instance, &mut heuristic, &config.params, instance.seed, deadline) {
            Ok(outcome) => outcome,
            Err(e) => return FitnessReport::failure(status_of(&e), format!("{}: {e}", instance.id()), elapsed()),
        };
        match verify_solution(instance, &outcome.solution) {
            Ok(check) if check.feasible => objectives.push(outcome.solution.objective),
            Ok(check) => {
                let detail = check.violation.map(|v| format!("{}: {}", v.constraint, v.detail)).unwrap_or_default();
                return FitnessReport::failure(
                    EvalStatus::InvalidOutput,
                    format!("{}: infeasible solution ({detail})", instance.id()),
                    elapsed(),
                );
            }
            Err(e) => {
                return FitnessReport::failure(EvalStatus::InvalidOutput, format!("{}: {e}", instance.id()), elapsed())
            }
        }
    }
    let fitness = -objectives.iter().map(|&o| cost_of(program.problem, o)).sum::<f64>() / objectives.len() as f64;
    FitnessReport {
        fitness: Fitness::new(fitness),
        objectives,
        status: EvalStatus::Ok,
        message: None,
        wall_seconds: elapsed(),
    }
}

/// Evaluates several programs (one sandbox each); reports come back in input order.
pub fn evaluate_many(
    programs: &[HeuristicProgram],
    dataset: &[Instance],
    config: &EvalConfig,
    exec: Execution,
) -> Vec<FitnessReport> {
    map_ordered(programs, exec, |p| evaluate(p, dataset, config))
}
