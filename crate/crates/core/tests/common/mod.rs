#![allow(dead_code)]

use pathwise::graph::{GraphNode, ParentMeta};
use pathwise::llm::{MockScript, Role};
use pathwise::orchestrator::{Evaluator, RunConfig, SandboxEvaluator};
use pathwise_problems::{Framework, Problem};
use pathwise_sandbox::{EvalStatus, Fitness, HeuristicProgram};

pub fn node(id: &str, perf: f64) -> GraphNode {
    GraphNode {
        id: id.to_string(),
        program: HeuristicProgram::new(format!("// {id}\n"), Framework::Aco, Problem::Tsp, format!("desc {id}")),
        kappa: String::new(),
        description: format!("desc {id}"),
        perf: Fitness::new(perf),
        status: if perf.is_finite() { EvalStatus::Ok } else { EvalStatus::RuntimeError },
        pm: Vec::<ParentMeta>::new(),
    }
}

/// Constructive TSP run on 4 instances of 20 nodes.
pub fn small_config(n_e: usize) -> RunConfig {
    let mut cfg = RunConfig::new(Framework::Constructive, Problem::Tsp);
    cfg.n_e = n_e;
    cfg.dataset.size = Some(20);
    cfg.dataset.count = Some(4);
    cfg.time_limit = 30.0;
    cfg
}

pub fn tsp_program(w: f64, v: f64) -> String {
    format!(
        "fn select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix) {{\n    \
let row = distance_matrix[current_node];\n    let back = distance_matrix[destination_node];\n    let scores = [];\n    \
for j in unvisited_nodes {{\n        scores.push(-row[j] + ({w:.4}) * back[j] + ({v:.4}) * row[j] * back[j]);\n    }}\n    scores\n}}\n"
    )
}

/// Programs with pairwise-distinct fitness on `small_config`'s data, worst first.
pub fn ascending_pool(cfg: &RunConfig, want: usize) -> Vec<(String, Fitness)> {
    let evaluator = SandboxEvaluator::for_run(cfg).expect("dataset");
    let sources: Vec<String> =
        (0..400).map(|k| tsp_program(-1.0 + (k % 20) as f64 * 0.1, -2.0 + (k / 20) as f64 * 0.2)).collect();
    let programs: Vec<HeuristicProgram> =
        sources.iter().map(|s| HeuristicProgram::new(s.clone(), Framework::Constructive, Problem::Tsp, "")).collect();
    let reports = evaluator.evaluate(&programs);
    let mut pool: Vec<(String, Fitness)> = Vec::new();
    for (s, r) in sources.into_iter().zip(reports) {
        let f = r.fitness;
        assert!(!f.is_sentinel(), "pool program failed: {:?}", r.message);
        if !pool.iter().any(|(_, g)| g.value().unwrap().to_bits() == f.value().unwrap().to_bits()) {
            pool.push((s, f));
        }
    }
    pool.sort_by_key(|a| a.1);
    assert!(pool.len() >= want, "only {} distinct programs", pool.len());
    pool
}

pub fn code_reply(description: &str, source: &str) -> String {
    format!("Description: {description}\n\n```rhai\n{source}```\n")
}

pub fn init_reply(description: &str, source: &str) -> String {
    format!("{}\nDerivation Rationale: start from {description}\n", code_reply(description, source))
}

/// Script for a run in which every step's best rollout beats everything before it.
/// `init` and `rollouts` are consumed in order; policy replies always pick the current best.
pub struct Plan {
    pub script: MockScript,
    pub best_source: String,
    pub best_fitness: Fitness,
}

pub fn improving_plan(
    pool: &[(String, Fitness)],
    n_p: usize,
    steps: &[(usize, usize)],
    n_a: usize,
    n_w: usize,
) -> Plan {
    let mut script = MockScript::new();
    let n_init = 5 * n_p;
    // Shuffle init order so the best root is not simply the last sample.
    let mut init: Vec<usize> = (0..n_init).collect();
    init.rotate_left(n_init / 3);
    for (k, &p) in init.iter().enumerate() {
        let _ = k;
        script.push(Role::Init, init_reply(&format!("init program {p}"), &pool[p].0));
    }
    let best_init_pos = init.iter().position(|&p| p == n_init - 1).unwrap();
    let mut best_id = format!("init_{best_init_pos}");
    let mut next = n_init;
    for &(round, step) in steps {
        for _ in 0..n_a {
            script.push(Role::Policy, format!("PARENTS: [{best_id}]\nDIRECTIVE: Tune the return-distance weight."));
        }
        for _ in 0..n_a * n_w {
            script.push(Role::WorldModel, code_reply(&format!("pool program {next}"), &pool[next].0));
            next += 1;
        }
        script.push(Role::PolicyCritic, format!("policy hint after round {round} step {step}"));
        script.push(Role::WmCritic, format!("wm hint after round {round} step {step}"));
        best_id = format!("entail_{round}_{step}");
    }
    Plan { script, best_source: pool[next - 1].0.clone(), best_fitness: pool[next - 1].1 }
}

use pathwise::llm::{synthetic_tokens, Backend, ChatRequest, ChatResult, LlmError};
use pathwise_sandbox::FitnessReport;

/// Fitness read from a `// score <x>` marker in the source; no marker fails.
pub struct MarkerEvaluator;

pub fn marker(x: f64) -> String {
    format!("fn select_next_node(a, b, c, d) {{ c }}\n// score {x}\n")
}

impl Evaluator for MarkerEvaluator {
    fn evaluate(&self, programs: &[HeuristicProgram]) -> Vec<FitnessReport> {
        programs
            .iter()
            .map(|p| {
                let score = p
                    .source
                    .lines()
                    .find_map(|l| l.strip_prefix("// score "))
                    .and_then(|s| s.trim().parse::<f64>().ok());
                match score {
                    Some(x) => FitnessReport {
                        fitness: Fitness::new(x),
                        objectives: vec![-x],
                        status: EvalStatus::Ok,
                        message: None,
                        wall_seconds: 0.0,
                    },
                    None => FitnessReport::failure(EvalStatus::RuntimeError, "no marker", 0.0),
                }
            })
            .collect()
    }
}

/// Mock whose replies are computed from the request by a closure.
pub struct ProgrammedBackend<F: Fn(&ChatRequest) -> Result<String, LlmError> + Send + Sync>(pub F);

impl<F: Fn(&ChatRequest) -> Result<String, LlmError> + Send + Sync> Backend for ProgrammedBackend<F> {
    fn id(&self) -> &str {
        "programmed"
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResult, LlmError> {
        let text = (self.0)(request)?;
        Ok(ChatResult {
            input_tokens: synthetic_tokens(&request.user),
            output_tokens: synthetic_tokens(&text),
            text,
            latency: std::time::Duration::ZERO,
            backend: "programmed".into(),
        })
    }
}

/// Frontier ids listed in a policy prompt, sorted.
pub fn prompt_ids(user: &str) -> Vec<String> {
    let mut ids: Vec<String> = user.lines().filter_map(|l| l.strip_prefix("ID: ")).map(str::to_string).collect();
    ids.sort();
    ids
}

/// Replies: init k scores -100 + k, world-model call k scores k, policy picks by call index.
pub fn rotating_reply(request: &ChatRequest) -> Result<String, LlmError> {
    Ok(match request.role {
        Role::Init => init_reply(&format!("init {}", request.index), &marker(-100.0 + request.index as f64)),
        Role::WorldModel => code_reply(&format!("wm {}", request.index), &marker(request.index as f64)),
        Role::Policy => {
            let ids = prompt_ids(&request.user);
            let parents = match request.index % 3 {
                0 => ids[0].clone(),
                1 => format!("{}, {}", ids[0], ids[1]),
                _ => ids[ids.len() - 1].clone(),
            };
            format!("PARENTS: [{parents}]\nDIRECTIVE: rotate {}", request.index)
        }
        Role::PolicyCritic => format!("policy reflection {}", request.index),
        Role::WmCritic => format!("wm reflection {}", request.index),
    })
}
