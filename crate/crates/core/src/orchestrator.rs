//! Population initialization, entailment steps, inner and outer loops,
//! budget accounting, best tracking and artifact emission.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use pathwise_problems::dataset::{EntrySpec, Manifest, Split};
use pathwise_problems::parallel::{map_ordered, Execution};
use pathwise_problems::{Framework, Instance, Problem, ProblemError};
use pathwise_sandbox::{evaluate_many, EvalConfig, EvalStatus, Fitness, FitnessReport, HeuristicProgram};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    self, best_and_worst, maybe_sample_phrase, normalize_entry, parse_code_reply, parse_policy_reply, parse_reflection,
    shuffle_state, ActionProposal, ActionSummary, CriticSample, Prompt, RolloutSummary, TaskContext,
    FALLBACK_DIRECTIVE, POLICY_WORD_LIMIT, WM_WORD_LIMIT,
};
use crate::demo::DemoBackend;
use crate::graph::{
    apply_entailment, init_graph, next_population, selection_diversity_rate, DiscardPool, EntailmentGraph, Frontier,
    GraphNode, GraphSnapshot, NodeId, ParentMeta,
};
use crate::llm::{
    Backend, ChatRequest, HttpBackend, LlmError, MockBackend, MockScript, RetryPolicy, Role, TokenLedger, Transcript,
    TranscriptEntry,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> ConfigError {
    ConfigError::Io { path: path.display().to_string(), source }
}

/// Where the training instances come from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// A manifest written by `gen-data`; its train entries are used.
    pub manifest: Option<PathBuf>,
    /// Generated train size; defaults to the standard train entry.
    pub size: Option<usize>,
    /// Number of train instances (generated, or a prefix of the manifest's).
    pub count: Option<usize>,
    pub seed_base: u64,
}

impl DatasetConfig {
    pub fn load(&self, framework: Framework, problem: Problem, exec: Execution) -> Result<Vec<Instance>, ConfigError> {
        let mut instances = Vec::new();
        if let Some(path) = &self.manifest {
            let (manifest, dir) = Manifest::load(path)?;
            if (manifest.framework, manifest.problem) != (framework, problem) {
                return Err(ConfigError::Invalid(format!(
                    "manifest is for {}/{}, run is for {framework}/{problem}",
                    manifest.framework, manifest.problem
                )));
            }
            for entry in manifest.entries(Split::Train) {
                instances.extend(manifest.instances(&dir, entry, exec)?);
            }
        } else {
            let defaults = Manifest::with_defaults(framework, problem, self.seed_base)?;
            let manifest = match (self.size, self.count) {
                (None, None) => defaults,
                (size, count) => {
                    let base = defaults.entries(Split::Train).next().ok_or_else(|| {
                        ConfigError::Invalid(format!("no default train entry for {framework}/{problem}"))
                    })?;
                    let spec = EntrySpec::new(Split::Train, size.unwrap_or(base.n), count.unwrap_or(base.count))
                        .with_overrides(base.overrides.clone());
                    Manifest::new(framework, problem, self.seed_base, &[spec])?
                }
            };
            for entry in manifest.entries(Split::Train) {
                instances.extend(manifest.generate(entry, exec)?);
            }
        }
        if let Some(count) = self.count {
            instances.truncate(count);
        }
        if instances.is_empty() {
            return Err(ConfigError::Invalid("training dataset is empty".into()));
        }
        Ok(instances)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    /// Replays a scripted reply file.
    #[default]
    Mock,
    /// Synthesizes valid replies offline.
    MockDemo,
    /// OpenAI-compatible endpoint.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Mock script path (TOML), for `kind = "mock"`.
    pub script: Option<PathBuf>,
    pub model: String,
    pub temperature: f64,
    pub reasoning_effort: Option<String>,
    pub verbosity: Option<String>,
    /// Forward reasoning-effort and verbosity to the endpoint.
    pub knobs: bool,
    pub retry: RetryPolicy,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            script: None,
            model: "gpt-4o-mini".to_string(),
            temperature: 1.0,
            reasoning_effort: None,
            verbosity: None,
            knobs: false,
            retry: RetryPolicy::default(),
        }
    }
}

impl BackendConfig {
    pub fn build(&self, framework: Framework, problem: Problem, seed: u64) -> Result<Box<dyn Backend>, ConfigError> {
        Ok(match self.kind {
            BackendKind::Mock => {
                let path =
                    self.script.as_ref().ok_or_else(|| ConfigError::Invalid("mock backend needs `script`".into()))?;
                Box::new(MockBackend::new(MockScript::load(path)?))
            }
            BackendKind::MockDemo => Box::new(DemoBackend::new(framework, problem, seed)?),
            BackendKind::Http => Box::new(HttpBackend::from_env(self.knobs, self.retry)),
        })
    }
}

fn d_n_a() -> usize {
    2
}
fn d_n_w() -> usize {
    2
}
fn d_n_p() -> usize {
    6
}
fn d_i_max() -> usize {
    3
}
fn d_n_e() -> usize {
    500
}
fn d_eps_init() -> f64 {
    0.5
}
fn d_eps_final() -> f64 {
    0.25
}
fn d_time_limit() -> f64 {
    60.0
}
fn d_language() -> String {
    "rhai".to_string()
}
fn d_concurrency() -> usize {
    1
}

/// Run configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub framework: Framework,
    pub problem: Problem,
    #[serde(default = "d_n_a")]
    pub n_a: usize,
    #[serde(default = "d_n_w")]
    pub n_w: usize,
    #[serde(default = "d_n_p")]
    pub n_p: usize,
    #[serde(default = "d_i_max")]
    pub i_max: usize,
    #[serde(default = "d_n_e")]
    pub n_e: usize,
    #[serde(default = "d_eps_init")]
    pub epsilon_init: f64,
    #[serde(default = "d_eps_final")]
    pub epsilon_final: f64,
    /// Seconds per heuristic evaluation over the whole training set.
    #[serde(default = "d_time_limit")]
    pub time_limit: f64,
    #[serde(default)]
    pub seed: u64,
    /// Code-fence language tag used in prompts.
    #[serde(default = "d_language")]
    pub code_language: String,
    /// Concurrent model calls and evaluation workers.
    #[serde(default = "d_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub backend: BackendConfig,
}

impl RunConfig {
    pub fn new(framework: Framework, problem: Problem) -> Self {
        Self {
            framework,
            problem,
            n_a: d_n_a(),
            n_w: d_n_w(),
            n_p: d_n_p(),
            i_max: d_i_max(),
            n_e: d_n_e(),
            epsilon_init: d_eps_init(),
            epsilon_final: d_eps_final(),
            time_limit: d_time_limit(),
            seed: 0,
            code_language: d_language(),
            concurrency: d_concurrency(),
            dataset: DatasetConfig::default(),
            backend: BackendConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        pathwise_problems::frameworks::signature_for(self.framework, self.problem)?;
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.n_a == 0 || self.n_w == 0 || self.n_p == 0 || self.i_max == 0 {
            return bad("n_a, n_w, n_p and i_max must be at least 1");
        }
        if !(0.0 <= self.epsilon_final && self.epsilon_final <= self.epsilon_init && self.epsilon_init <= 1.0) {
            return bad("need 0 <= epsilon_final <= epsilon_init <= 1");
        }
        if self.n_e < 5 * self.n_p {
            return bad("n_e must be at least 5 * n_p");
        }
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            return bad("time_limit must be positive");
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1");
        }
        if self.code_language.trim().is_empty() {
            return bad("code_language must not be empty");
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative dataset and script paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset.manifest, &mut cfg.backend.script].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn execution(&self) -> Execution {
        Execution::from_jobs(self.concurrency)
    }
}

/// Exploration rate after `evaluations` evaluations: linear from init to final over the budget.
pub fn epsilon(evaluations: usize, config: &RunConfig) -> Result<f64, ConfigError> {
    if evaluations > config.n_e {
        return Err(ConfigError::Invalid(format!("evaluation count {evaluations} exceeds budget {}", config.n_e)));
    }
    let frac = evaluations as f64 / config.n_e as f64;
    Ok(config.epsilon_init + (config.epsilon_final - config.epsilon_init) * frac)
}

/// Independent generator for a named subsystem.
pub fn named_rng(seed: u64, stream: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ h);
    rng.set_stream(h);
    rng
}

/// Scores candidate programs.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, programs: &[HeuristicProgram]) -> Vec<FitnessReport>;
}

/// Sandbox evaluation on a fixed training set, memoized by source text.
pub struct SandboxEvaluator {
    dataset: Vec<Instance>,
    config: EvalConfig,
    exec: Execution,
    cache: Mutex<HashMap<String, FitnessReport>>,
}

impl SandboxEvaluator {
    pub fn new(dataset: Vec<Instance>, config: EvalConfig, exec: Execution) -> Self {
        Self { dataset, config, exec, cache: Mutex::new(HashMap::new()) }
    }

    pub fn for_run(run: &RunConfig) -> Result<Self, ConfigError> {
        let exec = run.execution();
        let dataset = run.dataset.load(run.framework, run.problem, exec)?;
        let params = pathwise_problems::frameworks::framework_defaults(run.framework, run.problem)?;
        Ok(Self::new(dataset, EvalConfig::new(params, run.time_limit), exec))
    }

    pub fn dataset(&self) -> &[Instance] {
        &self.dataset
    }
}

impl Evaluator for SandboxEvaluator {
    fn evaluate(&self, programs: &[HeuristicProgram]) -> Vec<FitnessReport> {
        let mut fresh: Vec<HeuristicProgram> = Vec::new();
        {
            let cache = self.cache.lock().expect("cache lock");
            for p in programs {
                if !cache.contains_key(&p.source) && !fresh.iter().any(|f| f.source == p.source) {
                    fresh.push(p.clone());
                }
            }
        }
        let reports = evaluate_many(&fresh, &self.dataset, &self.config, self.exec);
        let mut cache = self.cache.lock().expect("cache lock");
        for (p, r) in fresh.into_iter().zip(reports) {
            cache.insert(p.source, r);
        }
        programs.iter().map(|p| cache[&p.source].clone()).collect()
    }
}

/// Current routed reflections.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reflections {
    pub policy: String,
    pub world_model: String,
}

/// One best-so-far sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub evaluations: usize,
    pub best: Fitness,
}

/// One evaluation, as written to `evaluations.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub evaluation: usize,
    pub id: NodeId,
    pub status: EvalStatus,
    pub fitness: Fitness,
    pub message: Option<String>,
}

/// Reflections produced after one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionRecord {
    pub round: usize,
    pub step: usize,
    pub policy: String,
    pub world_model: String,
}

/// Everything a run produced, complete or aborted.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub best: Option<GraphNode>,
    pub curve: Vec<CurvePoint>,
    /// Evaluation count at the end of init and after each step.
    pub step_marks: Vec<CurvePoint>,
    pub evaluations: usize,
    pub steps: usize,
    pub rounds: usize,
    pub selections: Vec<Vec<NodeId>>,
    pub snapshots: Vec<GraphSnapshot>,
    pub transcript: Transcript,
    pub eval_log: Vec<EvalRecord>,
    pub reflections: Vec<ReflectionRecord>,
    pub warnings: Vec<String>,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub framework: Framework,
    pub problem: Problem,
    pub evaluations: usize,
    pub budget: usize,
    pub steps: usize,
    pub rounds: usize,
    pub best_id: Option<NodeId>,
    pub best_fitness: Fitness,
    pub best_description: Option<String>,
    pub selection_diversity_rate: Option<f64>,
    pub tokens: TokenLedger,
    pub warnings: Vec<String>,
    pub aborted: Option<String>,
}

impl RunOutcome {
    pub fn best_program(&self) -> Option<&HeuristicProgram> {
        self.best.as_ref().map(|n| &n.program)
    }

    pub fn selection_diversity_rate(&self) -> Option<f64> {
        selection_diversity_rate(&self.selections)
    }

    pub fn summary(&self) -> Summary {
        Summary {
            framework: self.config.framework,
            problem: self.config.problem,
            evaluations: self.evaluations,
            budget: self.config.n_e,
            steps: self.steps,
            rounds: self.rounds,
            best_id: self.best.as_ref().map(|n| n.id.clone()),
            best_fitness: self.best.as_ref().map_or(Fitness::SENTINEL, |n| n.perf),
            best_description: self.best.as_ref().map(|n| n.description.clone()),
            selection_diversity_rate: self.selection_diversity_rate(),
            tokens: self.transcript.ledger().clone(),
            warnings: self.warnings.clone(),
            aborted: self.aborted.clone(),
        }
    }

    /// `evaluations,best_fitness` rows; failures print as `-inf`.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("evaluations,best_fitness\n");
        for p in &self.curve {
            let v = p.best.value().map_or_else(|| "-inf".to_string(), |v| v.to_string());
            out.push_str(&format!("{},{v}\n", p.evaluations));
        }
        out
    }

    /// Writes the artifact directory (created if needed).
    pub fn write_artifacts(&self, dir: &Path) -> Result<(), ConfigError> {
        let graphs = dir.join("graphs");
        fs::create_dir_all(&graphs).map_err(|e| io_err(&graphs, e))?;
        let write = |name: &Path, text: String| fs::write(name, text).map_err(|e| io_err(name, e));
        write(&dir.join("config.toml"), self.config.to_toml())?;
        write(&dir.join("curve.csv"), self.curve_csv())?;
        for snap in &self.snapshots {
            let path = graphs.join(format!("round_{:03}.json", snap.round));
            write(&path, serde_json::to_string_pretty(snap).expect("snapshots serialize") + "\n")?;
        }
        write(&dir.join("transcripts.jsonl"), self.transcript.to_jsonl())?;
        write(
            &dir.join("tokens.json"),
            serde_json::to_string_pretty(self.transcript.ledger()).expect("ledger serializes") + "\n",
        )?;
        let evals: String =
            self.eval_log.iter().map(|r| serde_json::to_string(r).expect("records serialize") + "\n").collect();
        write(&dir.join("evaluations.jsonl"), evals)?;
        let reflections: String =
            self.reflections.iter().map(|r| serde_json::to_string(r).expect("records serialize") + "\n").collect();
        write(&dir.join("reflections.jsonl"), reflections)?;
        if let Some(best) = self.best_program() {
            write(&dir.join("best_heuristic.rhai"), best.to_file_text())?;
        }
        write(
            &dir.join("summary.json"),
            serde_json::to_string_pretty(&self.summary()).expect("summary serializes") + "\n",
        )?;
        Ok(())
    }
}

/// Picks `n_p` roots from the initial samples: best first with pairwise-distinct
/// fitness, then (only if short) remaining finite samples, then failures.
pub fn select_initial(candidates: &[GraphNode], n_p: usize) -> (Vec<GraphNode>, bool) {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| candidates[b].perf.cmp(&candidates[a].perf));
    let mut chosen: Vec<usize> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for &k in &order {
        if chosen.len() == n_p {
            break;
        }
        if let Some(v) = candidates[k].perf.value() {
            if seen.insert(v.to_bits()) {
                chosen.push(k);
            }
        }
    }
    let short = chosen.len() < n_p;
    if short {
        for &k in &order {
            if chosen.len() == n_p {
                break;
            }
            if !chosen.contains(&k) {
                chosen.push(k);
            }
        }
    }
    (chosen.into_iter().map(|k| candidates[k].clone()).collect(), short)
}

/// Runs the search for one configuration.
pub struct Orchestrator<'a> {
    cfg: RunConfig,
    ctx: TaskContext,
    backend: &'a dyn Backend,
    evaluator: &'a dyn Evaluator,
    shuffle_rng: ChaCha8Rng,
    phrase_rng: ChaCha8Rng,
    fallback_rng: ChaCha8Rng,
    calls: BTreeMap<Role, usize>,
    reflections: Reflections,
    best: Option<GraphNode>,
    evaluations: usize,
    curve: Vec<CurvePoint>,
    step_marks: Vec<CurvePoint>,
    selections: Vec<Vec<NodeId>>,
    snapshots: Vec<GraphSnapshot>,
    transcript: Transcript,
    eval_log: Vec<EvalRecord>,
    reflection_log: Vec<ReflectionRecord>,
    warnings: Vec<String>,
    steps: usize,
    round: usize,
}

struct Rollout {
    i: usize,
    j: usize,
    program: HeuristicProgram,
    parse_failure: Option<String>,
}

impl<'a> Orchestrator<'a> {
    pub fn new(cfg: RunConfig, backend: &'a dyn Backend, evaluator: &'a dyn Evaluator) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let ctx = TaskContext::new(cfg.framework, cfg.problem, &cfg.code_language)?;
        Ok(Self {
            shuffle_rng: named_rng(cfg.seed, "shuffle"),
            phrase_rng: named_rng(cfg.seed, "phrases"),
            fallback_rng: named_rng(cfg.seed, "fallback"),
            cfg,
            ctx,
            backend,
            evaluator,
            calls: BTreeMap::new(),
            reflections: Reflections::default(),
            best: None,
            evaluations: 0,
            curve: Vec::new(),
            step_marks: Vec::new(),
            selections: Vec::new(),
            snapshots: Vec::new(),
            transcript: Transcript::default(),
            eval_log: Vec::new(),
            reflection_log: Vec::new(),
            warnings: Vec::new(),
            steps: 0,
            round: 0,
        })
    }

    pub fn context(&self) -> &TaskContext {
        &self.ctx
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn best(&self) -> Option<&GraphNode> {
        self.best.as_ref()
    }

    pub fn reflections(&self) -> &Reflections {
        &self.reflections
    }

    pub fn selections(&self) -> &[Vec<NodeId>] {
        &self.selections
    }

    fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }

    /// Sends prompts concurrently; call indices are assigned in input order first.
    fn chat_batch(&mut self, step: usize, prompts: Vec<(Role, Prompt)>) -> Result<Vec<String>, LlmError> {
        let requests: Vec<ChatRequest> = prompts
            .into_iter()
            .map(|(role, p)| {
                let counter = self.calls.entry(role).or_insert(0);
                let index = *counter;
                *counter += 1;
                ChatRequest {
                    role,
                    index,
                    model: self.cfg.backend.model.clone(),
                    system: p.system,
                    user: p.user,
                    temperature: self.cfg.backend.temperature,
                    reasoning_effort: self.cfg.backend.reasoning_effort.clone(),
                    verbosity: self.cfg.backend.verbosity.clone(),
                }
            })
            .collect();
        let backend = self.backend;
        let results = map_ordered(&requests, self.cfg.execution(), |r| backend.chat(r));
        let mut replies = Vec::with_capacity(results.len());
        for (request, result) in requests.into_iter().zip(results) {
            let result = result?;
            self.transcript.push(TranscriptEntry {
                round: self.round,
                step,
                request,
                reply: result.text.clone(),
                input_tokens: result.input_tokens,
                output_tokens: result.output_tokens,
                backend: result.backend,
            });
            replies.push(result.text);
        }
        Ok(replies)
    }

    fn record(&mut self, node: &GraphNode, report: &FitnessReport) {
        self.evaluations += 1;
        if self.best.as_ref().is_none_or(|b| node.perf > b.perf) {
            self.best = Some(node.clone());
        }
        let best = self.best.as_ref().map_or(Fitness::SENTINEL, |b| b.perf);
        self.curve.push(CurvePoint { evaluations: self.evaluations, best });
        self.eval_log.push(EvalRecord {
            evaluation: self.evaluations,
            id: node.id.clone(),
            status: report.status,
            fitness: report.fitness,
            message: report.message.clone(),
        });
    }

    fn mark(&mut self) {
        let best = self.best.as_ref().map_or(Fitness::SENTINEL, |b| b.perf);
        self.step_marks.push(CurvePoint { evaluations: self.evaluations, best });
    }

    /// Turns a code reply into a program, or the raw text with the parse failure.
    fn program_from_reply(&self, reply: &str) -> (HeuristicProgram, Option<String>, Option<String>, Option<String>) {
        let (f, p) = (self.cfg.framework, self.cfg.problem);
        match parse_code_reply(reply) {
            Ok(code) => {
                let source = normalize_entry(&code.source, self.ctx.function_name());
                (
                    HeuristicProgram::new(source, f, p, code.description.clone().unwrap_or_default()),
                    code.description,
                    code.rationale,
                    None,
                )
            }
            Err(e) => (HeuristicProgram::new(reply, f, p, ""), None, None, Some(e.to_string())),
        }
    }

    /// Evaluates programs, keeping parse failures out of the evaluator.
    fn evaluate_batch(&self, items: &[(HeuristicProgram, Option<String>)]) -> Vec<FitnessReport> {
        let ok: Vec<HeuristicProgram> = items.iter().filter(|(_, e)| e.is_none()).map(|(p, _)| p.clone()).collect();
        let mut reports = self.evaluator.evaluate(&ok).into_iter();
        items
            .iter()
            .map(|(_, e)| match e {
                None => reports.next().expect("one report per program"),
                Some(msg) => FitnessReport::failure(EvalStatus::ParseError, msg.clone(), 0.0),
            })
            .collect()
    }

    /// Samples `5 * n_p` initial heuristics, evaluates all, returns the roots.
    pub fn init_population(&mut self) -> Result<Vec<GraphNode>, LlmError> {
        let n = 5 * self.cfg.n_p;
        let prompt = agents::init_prompt(&self.ctx).expect("init template placeholders are complete");
        let replies = self.chat_batch(0, vec![(Role::Init, prompt); n])?;
        let parsed: Vec<_> = replies.iter().map(|r| self.program_from_reply(r)).collect();
        let items: Vec<(HeuristicProgram, Option<String>)> =
            parsed.iter().map(|(p, _, _, e)| (p.clone(), e.clone())).collect();
        let reports = self.evaluate_batch(&items);
        let mut candidates = Vec::with_capacity(n);
        for (k, ((program, description, rationale, _), report)) in parsed.into_iter().zip(reports).enumerate() {
            let node = GraphNode {
                id: format!("init_{k}"),
                description: description.unwrap_or_default(),
                program,
                kappa: rationale.unwrap_or_default(),
                perf: report.fitness,
                status: report.status,
                pm: Vec::new(),
            };
            self.record(&node, &report);
            candidates.push(node);
        }
        self.mark();
        let (roots, short) = select_initial(&candidates, self.cfg.n_p);
        if short {
            self.warn(format!("fewer than {} distinct finite fitness values among initial samples", self.cfg.n_p));
        }
        Ok(roots)
    }

    /// One multi-agent entailment step on the current graph.
    pub fn entailment_step(
        &mut self,
        graph: &mut EntailmentGraph,
        frontier: &mut Frontier,
        discard: &mut DiscardPool,
        step: usize,
    ) -> Result<(), LlmError> {
        let (n_a, n_w, r) = (self.cfg.n_a, self.cfg.n_w, self.round);
        let eps = epsilon(self.evaluations, &self.cfg).expect("budget checked before each step");
        let order = shuffle_state(frontier.ids(), &mut self.shuffle_rng);
        let view_nodes: Vec<GraphNode> =
            order.iter().map(|id| graph.node(id).expect("frontier ids are graph nodes").clone()).collect();
        let view: Vec<&GraphNode> = view_nodes.iter().collect();

        let policy_phrases: Vec<Option<&'static str>> = (0..n_a)
            .map(|_| maybe_sample_phrase(Role::Policy, eps, &mut self.phrase_rng).expect("valid epsilon"))
            .collect();
        let policy_prompts: Vec<(Role, Prompt)> = policy_phrases
            .iter()
            .map(|ph| {
                (
                    Role::Policy,
                    agents::policy_prompt(&self.ctx, &view, &self.reflections.policy, *ph).expect("complete"),
                )
            })
            .collect();
        let replies = self.chat_batch(step, policy_prompts.clone())?;
        let valid = frontier.ids().to_vec();
        let mut proposals: Vec<Option<ActionProposal>> = Vec::with_capacity(n_a);
        let mut retry = Vec::new();
        for (i, reply) in replies.iter().enumerate() {
            match parse_policy_reply(reply, &valid) {
                Ok(p) => proposals.push(Some(p)),
                Err(e) => {
                    self.warn(format!("round {r} step {step}: policy reply {i} rejected ({e}); resampling"));
                    proposals.push(None);
                    retry.push(i);
                }
            }
        }
        if !retry.is_empty() {
            let prompts = retry.iter().map(|&i| policy_prompts[i].clone()).collect();
            let replies = self.chat_batch(step, prompts)?;
            for (&i, reply) in retry.iter().zip(&replies) {
                match parse_policy_reply(reply, &valid) {
                    Ok(p) => proposals[i] = Some(p),
                    Err(e) => {
                        let pick = valid.choose(&mut self.fallback_rng).expect("frontier is non-empty").clone();
                        self.warn(format!(
                            "round {r} step {step}: policy reply {i} rejected again ({e}); using parent {pick}"
                        ));
                        proposals[i] = Some(ActionProposal {
                            parents: vec![pick],
                            directive: FALLBACK_DIRECTIVE.to_string(),
                            raw: reply.clone(),
                            phrase: None,
                            fallback: true,
                        });
                    }
                }
            }
        }
        let proposals: Vec<ActionProposal> = proposals
            .into_iter()
            .zip(&policy_phrases)
            .map(|(p, ph)| {
                let mut p = p.expect("every action resolved");
                p.phrase = ph.map(str::to_string);
                p
            })
            .collect();
        for p in &proposals {
            self.selections.push(p.parents.clone());
        }

        let mut wm_prompts = Vec::with_capacity(n_a * n_w);
        for p in &proposals {
            let parents: Vec<&GraphNode> =
                p.parents.iter().map(|id| graph.node(id).expect("validated parent")).collect();
            for _ in 0..n_w {
                let phrase = maybe_sample_phrase(Role::WorldModel, eps, &mut self.phrase_rng).expect("valid epsilon");
                let prompt = agents::world_model_prompt(
                    &self.ctx,
                    &parents,
                    &p.directive,
                    &self.reflections.world_model,
                    phrase,
                )
                .expect("complete");
                wm_prompts.push((Role::WorldModel, prompt));
            }
        }
        let replies = self.chat_batch(step, wm_prompts)?;
        let mut rollouts = Vec::with_capacity(n_a * n_w);
        for (k, reply) in replies.iter().enumerate() {
            let (i, j) = (k / n_w, k % n_w);
            let (mut program, description, _, failure) = self.program_from_reply(reply);
            if failure.is_none() && description.is_none() {
                self.warn(format!("round {r} step {step}: rollout ({i},{j}) has no description; using the directive"));
                program.description = proposals[i].directive.clone();
            }
            rollouts.push(Rollout { i, j, program, parse_failure: failure });
        }
        let items: Vec<(HeuristicProgram, Option<String>)> =
            rollouts.iter().map(|ro| (ro.program.clone(), ro.parse_failure.clone())).collect();
        let reports = self.evaluate_batch(&items);
        let fitnesses: Vec<Fitness> = reports.iter().map(|rep| rep.fitness).collect();
        let (star, worst) = best_and_worst(&fitnesses).expect("at least one rollout");

        let pm_of = |p: &ActionProposal| -> Vec<ParentMeta> {
            p.parents
                .iter()
                .map(|id| {
                    let n = graph.node(id).expect("validated parent");
                    ParentMeta { description: n.description.clone(), fitness: n.perf }
                })
                .collect()
        };
        let pms: Vec<Vec<ParentMeta>> = proposals.iter().map(pm_of).collect();
        let mut nodes = Vec::with_capacity(rollouts.len());
        for (k, (ro, rep)) in rollouts.iter().zip(&reports).enumerate() {
            let id =
                if k == star { format!("entail_{r}_{step}") } else { format!("rollout_{r}_{step}_{}_{}", ro.i, ro.j) };
            let node = GraphNode {
                id,
                description: ro.program.description.clone(),
                program: ro.program.clone(),
                kappa: proposals[ro.i].directive.clone(),
                perf: rep.fitness,
                status: rep.status,
                pm: pms[ro.i].clone(),
            };
            self.record(&node, rep);
            nodes.push(node);
        }
        let child = nodes[star].clone();
        for (k, node) in nodes.iter().enumerate() {
            if k != star {
                discard.push(graph, node.clone()).expect("rollout ids are fresh");
            }
        }
        let best_id = self.best.as_ref().expect("best exists after evaluation").id.clone();
        let action = &proposals[rollouts[star].i];
        apply_entailment(graph, frontier, &action.parents, &action.directive, child, &best_id)
            .expect("parents come from the frontier and ids are fresh");
        self.steps += 1;
        self.mark();

        let actions: Vec<ActionSummary> = proposals
            .iter()
            .enumerate()
            .map(|(i, p)| ActionSummary {
                parents: p.parents.clone(),
                directive: p.directive.clone(),
                rollouts: (0..n_w)
                    .map(|j| {
                        let k = i * n_w + j;
                        RolloutSummary { description: nodes[k].description.clone(), fitness: nodes[k].perf }
                    })
                    .collect(),
            })
            .collect();
        let mut critic_prompts =
            vec![(Role::PolicyCritic, agents::policy_critic_prompt(&self.ctx, &view, &actions).expect("complete"))];
        let wm_critic = nodes.len() >= 2;
        if wm_critic {
            let prompt =
                agents::wm_critic_prompt(&self.ctx, CriticSample::of(&nodes[worst]), CriticSample::of(&nodes[star]))
                    .expect("complete");
            critic_prompts.push((Role::WmCritic, prompt));
        } else {
            self.warn(format!("round {r} step {step}: one rollout only; world-model reflection kept"));
        }
        let replies = self.chat_batch(step, critic_prompts)?;
        let (policy, warning) = parse_reflection(&replies[0], POLICY_WORD_LIMIT, Role::PolicyCritic);
        if let Some(w) = warning {
            self.warn(w);
        }
        self.reflections.policy = policy;
        if wm_critic {
            let (wm, warning) = parse_reflection(&replies[1], WM_WORD_LIMIT, Role::WmCritic);
            if let Some(w) = warning {
                self.warn(w);
            }
            self.reflections.world_model = wm;
        }
        self.reflection_log.push(ReflectionRecord {
            round: r,
            step,
            policy: self.reflections.policy.clone(),
            world_model: self.reflections.world_model.clone(),
        });
        Ok(())
    }

    /// Steps until `i_max`, a single-node frontier, or an exhausted budget.
    /// Returns the number of steps taken.
    pub fn inner_loop(
        &mut self,
        graph: &mut EntailmentGraph,
        frontier: &mut Frontier,
        discard: &mut DiscardPool,
    ) -> Result<usize, LlmError> {
        let per_step = self.cfg.n_a * self.cfg.n_w;
        let mut t = 0;
        while t < self.cfg.i_max && frontier.len() > 1 {
            if self.evaluations + per_step > self.cfg.n_e {
                break;
            }
            self.entailment_step(graph, frontier, discard, t)?;
            t += 1;
        }
        Ok(t)
    }

    fn outer(&mut self) -> Result<(), LlmError> {
        let mut population = self.init_population()?;
        while self.evaluations < self.cfg.n_e && !population.is_empty() {
            let (mut graph, mut frontier) = init_graph(population).expect("population ids are distinct");
            let mut discard = DiscardPool::default();
            let result = self.inner_loop(&mut graph, &mut frontier, &mut discard);
            let steps = graph.edges().len();
            let next = next_population(&graph, &discard, self.cfg.n_p);
            if next.len() < self.cfg.n_p {
                self.warn(format!(
                    "round {}: next population has {} of {} nodes",
                    self.round,
                    next.len(),
                    self.cfg.n_p
                ));
            }
            self.snapshots.push(GraphSnapshot::new(self.round, steps, &graph, &frontier, &discard, &next));
            self.round += 1;
            if result? == 0 {
                break;
            }
            population = next;
        }
        Ok(())
    }

    /// Runs to completion; a backend failure ends the run early with partial results.
    pub fn run(mut self) -> RunOutcome {
        let aborted = self.outer().err().map(|e| {
            log::error!("run aborted: {e}");
            e.to_string()
        });
        RunOutcome {
            config: self.cfg,
            best: self.best,
            curve: self.curve,
            step_marks: self.step_marks,
            evaluations: self.evaluations,
            steps: self.steps,
            rounds: self.round,
            selections: self.selections,
            snapshots: self.snapshots,
            transcript: self.transcript,
            eval_log: self.eval_log,
            reflections: self.reflection_log,
            warnings: self.warnings,
            aborted,
        }
    }
}

/// Builds the backend and evaluator from `cfg`, runs, and writes artifacts to `out`.
pub fn run_config(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutcome, ConfigError> {
    let backend = cfg.backend.build(cfg.framework, cfg.problem, cfg.seed)?;
    let evaluator = SandboxEvaluator::for_run(cfg)?;
    let outcome = Orchestrator::new(cfg.clone(), backend.as_ref(), &evaluator)?.run();
    if let Some(dir) = out {
        outcome.write_artifacts(dir)?;
    }
    Ok(outcome)
}
