//! Prompt construction and reply parsing for the initializer, policy,
//! world-model and critic roles; state shuffling and phrase injection.

use std::sync::OnceLock;

use pathwise_problems::frameworks::{signature_for, HeuristicSignature};
use pathwise_problems::{Framework, Problem, ProblemError};
use pathwise_sandbox::Fitness;
use rand::seq::SliceRandom;
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphNode, NodeId};
use crate::llm::Role;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("no value for placeholder `{{{0}}}`")]
    MissingPlaceholder(String),
    #[error("role {0} has no phrase inventory")]
    NoInventory(Role),
    #[error("epsilon {0} outside [0, 1]")]
    Epsilon(f64),
}

/// Typed failure of a policy reply.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyParseError {
    #[error("reply lacks a `{0}:` field")]
    Malformed(&'static str),
    #[error("empty parent list")]
    EmptyParents,
    #[error("unknown parent id `{0}`")]
    UnknownId(String),
}

/// Typed failure of a world-model or initializer reply.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeParseError {
    #[error("reply has no fenced code block")]
    MissingFence,
    #[error("code block is empty")]
    EmptyCode,
}

/// System and user text of one role's prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template {
    pub system: &'static str,
    pub user: &'static str,
}

pub fn template(role: Role) -> Template {
    match role {
        Role::Init => Template {
            system: include_str!("../assets/templates/init.system.txt"),
            user: include_str!("../assets/templates/init.user.txt"),
        },
        Role::Policy => Template {
            system: include_str!("../assets/templates/policy.system.txt"),
            user: include_str!("../assets/templates/policy.user.txt"),
        },
        Role::WorldModel => Template {
            system: include_str!("../assets/templates/world_model.system.txt"),
            user: include_str!("../assets/templates/world_model.user.txt"),
        },
        Role::PolicyCritic => Template {
            system: include_str!("../assets/templates/policy_critic.system.txt"),
            user: include_str!("../assets/templates/policy_critic.user.txt"),
        },
        Role::WmCritic => Template {
            system: include_str!("../assets/templates/wm_critic.system.txt"),
            user: include_str!("../assets/templates/wm_critic.user.txt"),
        },
    }
}

const POLICY_PHRASES: &str = include_str!("../assets/phrases/policy.txt");
const WORLD_MODEL_PHRASES: &str = include_str!("../assets/phrases/world_model.txt");

/// Exploratory phrases of the policy (18) or world model (9).
pub fn phrases(role: Role) -> Result<Vec<&'static str>, AgentError> {
    let text = match role {
        Role::Policy => POLICY_PHRASES,
        Role::WorldModel => WORLD_MODEL_PHRASES,
        other => return Err(AgentError::NoInventory(other)),
    };
    Ok(text.lines().filter(|l| !l.trim().is_empty()).collect())
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_]+)\}").expect("valid regex"))
}

/// Single-pass `{name}` substitution. Substituted payloads are not rescanned.
pub fn render(template: &str, values: &[(&str, &str)]) -> Result<String, AgentError> {
    let mut out = String::with_capacity(template.len());
    let mut last = 0;
    for cap in placeholder_re().captures_iter(template) {
        let whole = cap.get(0).expect("match");
        let name = &cap[1];
        let value = values
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| AgentError::MissingPlaceholder(name.to_string()))?;
        out.push_str(&template[last..whole.start()]);
        out.push_str(value);
        last = whole.end();
    }
    out.push_str(&template[last..]);
    Ok(out)
}

/// Rendered system and user messages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

fn prompt(role: Role, values: &[(&str, &str)]) -> Result<Prompt, AgentError> {
    let t = template(role);
    Ok(Prompt { system: render(t.system, values)?, user: render(t.user, values)? })
}

/// Task description handed to every role for one (framework, problem) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskContext {
    pub signature: &'static HeuristicSignature,
    pub problem_description: String,
    pub function_description: String,
    /// Code-fence language tag, e.g. `rhai`.
    pub code_language: String,
}

impl TaskContext {
    pub fn new(framework: Framework, problem: Problem, code_language: &str) -> Result<Self, ProblemError> {
        let signature = signature_for(framework, problem)?;
        let (problem_description, function_description) = describe(framework, problem);
        Ok(Self {
            signature,
            problem_description: problem_description.to_string(),
            function_description: function_description.to_string(),
            code_language: code_language.to_string(),
        })
    }

    pub fn function_name(&self) -> &'static str {
        self.signature.function_name
    }

    /// Entry point as written in the dialect, e.g. `fn priority(item, bins_remain_cap)`.
    pub fn function_signature(&self) -> String {
        format!("fn {}", self.signature.call_form())
    }

    /// `rhai` becomes `Rhai`.
    pub fn code_language_title(&self) -> String {
        let mut chars = self.code_language.chars();
        chars.next().map(|c| c.to_uppercase().chain(chars).collect()).unwrap_or_default()
    }
}

const DIALECT: &str =
    "The code is a Rhai script: define the function with `fn`, return the result as the last expression, \
and use only arithmetic, loops, arrays and the built-in math functions (no imports, I/O, eval or recursion). \
Numbers are floats except indices, which are integers. Matrices support `m[i][j]`, `m.len()` and iteration over rows.";

fn describe(framework: Framework, problem: Problem) -> (&'static str, String) {
    let (problem_text, function_text) = match (framework, problem) {
        (Framework::Constructive, Problem::Tsp) => (
            "the Traveling Salesman Problem (TSP): visit every node exactly once and return to the start with the shortest total distance.",
            "The function scores the next node to visit. Inputs: `current_node` and `destination_node` (indices), \
`unvisited_nodes` (array of candidate indices) and `distance_matrix`. Return one score per entry of `unvisited_nodes`; \
the node with the highest score is visited next.",
        ),
        (Framework::Constructive, Problem::Kp) => (
            "the 0/1 Knapsack Problem (KP): choose items to maximize total value without exceeding the capacity.",
            "The function scores the next item to add. Inputs: `remaining_capacity`, `weights` and `values` (arrays over all items) \
and `candidates` (indices of unselected items that still fit). Return one score per candidate; the highest score is added next.",
        ),
        (Framework::Constructive, Problem::BppOnline) => (
            "the online Bin Packing Problem: items arrive one by one and each must be placed in a bin of fixed capacity, using as few bins as possible.",
            "The function scores the bins for the arriving item. Inputs: `item` (its size) and `bins_remain_cap` (remaining capacity of each \
bin that can hold the item, the last entry being an empty bin). Return one score per bin; the item goes to the highest-scoring bin.",
        ),
        (Framework::Aco, Problem::Tsp) => (
            "the Traveling Salesman Problem (TSP) solved by ant colony optimization: find the shortest closed tour visiting every node once.",
            "The function returns an n x n matrix of non-negative heuristic desirabilities for moving from node i to node j. \
Input: `distance_matrix`. Ants combine these values with pheromone trails when choosing the next node.",
        ),
        (Framework::Aco, Problem::Cvrp) => (
            "the Capacitated Vehicle Routing Problem (CVRP) solved by ant colony optimization: serve every customer from depot 0 with capacity-limited vehicles, minimizing total distance.",
            "The function returns an n x n matrix of non-negative desirabilities for traveling from node i to node j. Inputs: `distance_matrix`, \
`coordinates` (array of [x, y]), `demands` (node 0 is the depot with demand 0) and `capacity`.",
        ),
        (Framework::Aco, Problem::Op) => (
            "the Orienteering Problem (OP) solved by ant colony optimization: starting and ending at depot 0, collect the largest total prize with a tour no longer than the budget.",
            "The function returns an n x n matrix of non-negative desirabilities for moving from node i to node j. Inputs: `prize` (per node), \
`distance` (matrix) and `maxlen` (tour length budget).",
        ),
        (Framework::Aco, Problem::Mkp) => (
            "the Multidimensional Knapsack Problem (MKP) solved by ant colony optimization: select items maximizing total prize while every weight constraint stays within capacity 1.",
            "The function returns one non-negative desirability per item. Inputs: `prize` (per item) and `weight` (n x m matrix, row i holds item i's \
weight in each of the m constraints).",
        ),
        (Framework::Aco, Problem::BppOffline) => (
            "the offline Bin Packing Problem solved by ant colony optimization: pack all items into as few bins of fixed capacity as possible.",
            "The function returns an n x n matrix of non-negative desirabilities for placing item j in the same bin right after item i. \
Inputs: `demand` (item sizes) and `capacity`.",
        ),
        (Framework::Gls, Problem::Tsp) => (
            "the Traveling Salesman Problem (TSP) solved by guided local search: find the shortest closed tour visiting every node once.",
            "The function returns an n x n matrix of edge badness used to decide which tour edges to penalize; edges with larger values are \
penalized earlier. Input: `distance_matrix`.",
        ),
        _ => ("an unsupported problem.", "The function is not defined for this pair."),
    };
    (problem_text, format!("{function_text} {DIALECT}"))
}

/// Objective value shown to the model: the native cost (negated fitness), `inf` for failures.
pub fn display_objective(fitness: Fitness) -> String {
    match fitness.value() {
        Some(0.0) => "0".to_string(),
        Some(v) => format!("{}", -v),
        None => "inf".to_string(),
    }
}

/// One policy or policy-critic node block.
pub fn node_block(node: &GraphNode) -> String {
    let parents = if node.pm.is_empty() {
        "None".to_string()
    } else {
        node.pm
            .iter()
            .map(|p| format!("- {} (objective value: {})", p.description, display_objective(p.fitness)))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let kappa = if node.kappa.trim().is_empty() { "None" } else { node.kappa.trim() };
    format!(
        "ID: {}\nDescription: {}\nHeuristics used to derive this candidate:\n{}\nDerivation logic:\n{}\nCode:\n{}\nObjective value: {}",
        node.id,
        node.description,
        parents,
        kappa,
        node.program.source.trim_end(),
        display_objective(node.perf)
    )
}

pub fn node_blocks(view: &[&GraphNode]) -> String {
    view.iter().map(|n| node_block(n)).collect::<Vec<_>>().join("\n\n")
}

/// One world-model parent block: id, description, fenced code and objective.
pub fn parent_block(node: &GraphNode, code_language: &str) -> String {
    format!(
        "ID: {}\n{}\n```{}\n{}\n```\nObjective value: {}",
        node.id,
        node.description,
        code_language,
        node.program.source.trim_end(),
        display_objective(node.perf)
    )
}

pub fn init_prompt(ctx: &TaskContext) -> Result<Prompt, AgentError> {
    let signature = ctx.function_signature();
    prompt(
        Role::Init,
        &[
            ("function_name", ctx.function_name()),
            ("problem_description", &ctx.problem_description),
            ("function_description", &ctx.function_description),
            ("function_signature", &signature),
            ("code_language", &ctx.code_language),
        ],
    )
}

pub fn policy_prompt(
    ctx: &TaskContext,
    view: &[&GraphNode],
    reflection: &str,
    phrase: Option<&str>,
) -> Result<Prompt, AgentError> {
    let k = view.len().to_string();
    let heuristics = node_blocks(view);
    prompt(
        Role::Policy,
        &[
            ("problem_description", &ctx.problem_description),
            ("function_description", &ctx.function_description),
            ("k", &k),
            ("heuristics", &heuristics),
            ("reflection", reflection),
            ("exploratory_phrase", phrase.unwrap_or("")),
        ],
    )
}

pub fn world_model_prompt(
    ctx: &TaskContext,
    parents: &[&GraphNode],
    directive: &str,
    reflection: &str,
    phrase: Option<&str>,
) -> Result<Prompt, AgentError> {
    let k = parents.len().to_string();
    let blocks = parents.iter().map(|p| parent_block(p, &ctx.code_language)).collect::<Vec<_>>().join("\n\n");
    let title = ctx.code_language_title();
    prompt(
        Role::WorldModel,
        &[
            ("function_name", ctx.function_name()),
            ("problem_description", &ctx.problem_description),
            ("function_description", &ctx.function_description),
            ("k", &k),
            ("parents", &blocks),
            ("directive", directive),
            ("exploratory_phrase", phrase.unwrap_or("")),
            ("reflection", reflection),
            ("function_signature", ctx.function_name()),
            ("code_language_title", &title),
            ("code_language", &ctx.code_language),
        ],
    )
}

/// A rollout as summarized for the policy critic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub description: String,
    pub fitness: Fitness,
}

/// One evaluated action: parent set, directive and its rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSummary {
    pub parents: Vec<NodeId>,
    pub directive: String,
    pub rollouts: Vec<RolloutSummary>,
}

impl ActionSummary {
    pub fn reward(&self) -> f64 {
        action_reward(&self.rollouts.iter().map(|r| r.fitness).collect::<Vec<_>>())
    }
}

/// Action blocks in the given order, numbered from 0.
pub fn action_blocks(actions: &[&ActionSummary]) -> String {
    actions
        .iter()
        .enumerate()
        .map(|(rank, a)| {
            let rollouts = a
                .rollouts
                .iter()
                .enumerate()
                .map(|(j, r)| {
                    format!("  rollout_{j}: {} (objective value: {})", r.description, display_objective(r.fitness))
                })
                .collect::<Vec<_>>()
                .join("\n");
            format!(
                "Action {rank}\nParent IDs: [{}]\nDirective:  {}\nRollouts:\n{rollouts}",
                a.parents.join(", "),
                a.directive
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Indices of `rewards` from best to worst; ties keep the lower index first.
pub fn critic_order(rewards: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rewards.len()).collect();
    order.sort_by(|&a, &b| rewards[b].total_cmp(&rewards[a]));
    order
}

pub fn policy_critic_prompt(
    ctx: &TaskContext,
    view: &[&GraphNode],
    actions: &[ActionSummary],
) -> Result<Prompt, AgentError> {
    let rewards: Vec<f64> = actions.iter().map(ActionSummary::reward).collect();
    let ranked: Vec<&ActionSummary> = critic_order(&rewards).into_iter().map(|i| &actions[i]).collect();
    let k = view.len().to_string();
    let heuristics = node_blocks(view);
    let blocks = action_blocks(&ranked);
    prompt(
        Role::PolicyCritic,
        &[
            ("problem_description", &ctx.problem_description),
            ("function_description", &ctx.function_description),
            ("k", &k),
            ("heuristics", &heuristics),
            ("actions", &blocks),
        ],
    )
}

/// A rollout shown to the world-model critic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticSample<'a> {
    pub description: &'a str,
    pub fitness: Fitness,
    pub source: &'a str,
}

impl<'a> CriticSample<'a> {
    pub fn of(node: &'a GraphNode) -> Self {
        Self { description: &node.description, fitness: node.perf, source: &node.program.source }
    }
}

pub fn wm_critic_prompt(
    ctx: &TaskContext,
    worse: CriticSample<'_>,
    better: CriticSample<'_>,
) -> Result<Prompt, AgentError> {
    let worse_objective = display_objective(worse.fitness);
    let better_objective = display_objective(better.fitness);
    let worse_code = format!("```{}\n{}\n```", ctx.code_language, worse.source.trim_end());
    let better_code = format!("```{}\n{}\n```", ctx.code_language, better.source.trim_end());
    prompt(
        Role::WmCritic,
        &[
            ("function_signature", ctx.function_name()),
            ("problem_description", &ctx.problem_description),
            ("function_description", &ctx.function_description),
            ("worse_description", worse.description),
            ("worse_objective", &worse_objective),
            ("worse_code", &worse_code),
            ("better_description", better.description),
            ("better_objective", &better_objective),
            ("better_code", &better_code),
        ],
    )
}

/// Parsed policy reply `(S, kappa)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionProposal {
    pub parents: Vec<NodeId>,
    pub directive: String,
    pub raw: String,
    pub phrase: Option<String>,
    /// Set when the proposal is the uniform singleton substitute for two failed replies.
    pub fallback: bool,
}

fn field_re(name: &str) -> Regex {
    Regex::new(&format!(r"(?im)^[\s*#>_`-]*{name}[\s*_`]*:[\s*_`]*(.*)$")).expect("valid regex")
}

fn policy_res() -> &'static (Regex, Regex) {
    static RE: OnceLock<(Regex, Regex)> = OnceLock::new();
    RE.get_or_init(|| (field_re("PARENTS"), field_re("DIRECTIVE")))
}

/// Parses `PARENTS: [...]` and `DIRECTIVE: ...`, validating ids against `valid`.
/// Duplicate ids are dropped, keeping first occurrences.
pub fn parse_policy_reply(text: &str, valid: &[NodeId]) -> Result<ActionProposal, PolicyParseError> {
    let (parents_re, directive_re) = policy_res();
    let parents_cap = parents_re.captures(text).ok_or(PolicyParseError::Malformed("PARENTS"))?;
    let directive_cap = directive_re.captures(text).ok_or(PolicyParseError::Malformed("DIRECTIVE"))?;
    let mut list = parents_cap[1].trim();
    if let Some(open) = list.find('[') {
        list = &list[open + 1..];
        list = &list[..list.find(']').unwrap_or(list.len())];
    }
    let mut parents: Vec<NodeId> = Vec::new();
    for token in list.split(|c: char| c == ',' || c.is_whitespace()) {
        let token = token.trim_matches(|c: char| matches!(c, '"' | '\'' | '`' | '*' | '(' | ')' | '.'));
        let token = token.strip_prefix("ID").map(|t| t.trim_start_matches([':', ' '])).unwrap_or(token);
        if token.is_empty() {
            continue;
        }
        if !valid.iter().any(|v| v == token) {
            return Err(PolicyParseError::UnknownId(token.to_string()));
        }
        if !parents.iter().any(|p| p == token) {
            parents.push(token.to_string());
        }
    }
    if parents.is_empty() {
        return Err(PolicyParseError::EmptyParents);
    }
    let start = directive_cap.get(1).expect("group").start();
    let directive = text[start..].split_whitespace().collect::<Vec<_>>().join(" ");
    let directive = directive.trim_matches(|c: char| c == '[' || c == ']' || c == '*' || c == '`').trim().to_string();
    if directive.is_empty() {
        return Err(PolicyParseError::Malformed("DIRECTIVE"));
    }
    Ok(ActionProposal { parents, directive, raw: text.to_string(), phrase: None, fallback: false })
}

/// Parsed code reply: source, description and (initializer only) rationale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeReply {
    pub source: String,
    pub description: Option<String>,
    pub rationale: Option<String>,
}

fn fence_res() -> &'static (Regex, Regex) {
    static RE: OnceLock<(Regex, Regex)> = OnceLock::new();
    RE.get_or_init(|| {
        (
            Regex::new(r"^\s*```\s*[A-Za-z0-9_+.-]*\s*$").expect("valid regex"),
            Regex::new(r"^\s*```\s*$").expect("valid regex"),
        )
    })
}

/// Splits a reply into (text outside the first fence, first fence body).
fn first_fence(text: &str) -> Option<(String, String)> {
    let (open, close) = fence_res();
    let lines: Vec<&str> = text.lines().collect();
    let start = lines.iter().position(|l| open.is_match(l))?;
    let end = start + 1 + lines[start + 1..].iter().position(|l| close.is_match(l))?;
    let body = lines[start + 1..end].join("\n");
    let outside = lines[..start].iter().chain(&lines[end + 1..]).copied().collect::<Vec<_>>().join("\n");
    Some((outside, body))
}

fn clean_field(s: &str) -> String {
    s.replace('`', "")
        .trim()
        .trim_matches(|c| c == '<' || c == '>' || c == '*')
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn description_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| field_re("Description"))
}

fn rationale_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| field_re("Derivation Rationale"))
}

/// First fenced block is the program; the `Description:` line outside it is the description.
pub fn parse_code_reply(text: &str) -> Result<CodeReply, CodeParseError> {
    let (outside, body) = first_fence(text).ok_or(CodeParseError::MissingFence)?;
    if body.trim().is_empty() {
        return Err(CodeParseError::EmptyCode);
    }
    let description = description_re().captures(&outside).map(|c| clean_field(&c[1])).filter(|d| !d.is_empty());
    let rationale = rationale_re().captures(&outside).map(|c| {
        let start = c.get(1).expect("group").start();
        clean_field(&outside[start..])
    });
    Ok(CodeReply { source: body + "\n", description, rationale: rationale.filter(|r| !r.is_empty()) })
}

/// Renames `<name>_v2` (any version suffix) back to the entry name.
pub fn normalize_entry(source: &str, function_name: &str) -> String {
    let re = Regex::new(&format!(r"\b{}_v\d+\b", regex::escape(function_name))).expect("valid regex");
    re.replace_all(source, function_name).into_owned()
}

/// Mean rollout fitness; failures count as the most negative finite value.
pub fn action_reward(fitnesses: &[Fitness]) -> f64 {
    if fitnesses.is_empty() {
        return Fitness::SENTINEL.stand_in();
    }
    let n = fitnesses.len() as f64;
    fitnesses.iter().map(|f| f.stand_in() / n).sum()
}

/// Indices of the best (max) and worst (min) fitness; ties go to the first index.
pub fn best_and_worst(fitnesses: &[Fitness]) -> Option<(usize, usize)> {
    if fitnesses.is_empty() {
        return None;
    }
    let mut best = 0;
    let mut worst = 0;
    for (k, f) in fitnesses.iter().enumerate() {
        if *f > fitnesses[best] {
            best = k;
        }
        if *f < fitnesses[worst] {
            worst = k;
        }
    }
    if best == worst && fitnesses.len() > 1 {
        log::info!("all rollouts share one fitness; worst is the next rollout in order");
        worst = if best == 0 { 1 } else { 0 };
    }
    Some((best, worst))
}

/// Uniformly random presentation order.
pub fn shuffle_state<T: Clone, R: Rng + ?Sized>(items: &[T], rng: &mut R) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(rng);
    v
}

/// With probability `epsilon`, a uniform draw from the role's phrase inventory.
pub fn maybe_sample_phrase<R: Rng + ?Sized>(
    role: Role,
    epsilon: f64,
    rng: &mut R,
) -> Result<Option<&'static str>, AgentError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(AgentError::Epsilon(epsilon));
    }
    let inventory = phrases(role)?;
    let u: f64 = rng.gen();
    if u < epsilon {
        Ok(inventory.choose(rng).copied())
    } else {
        Ok(None)
    }
}

pub const POLICY_WORD_LIMIT: usize = 60;
pub const WM_WORD_LIMIT: usize = 30;

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Directive attached to the substitute action after two failed policy replies.
pub const FALLBACK_DIRECTIVE: &str =
    "Make a focused modification to the selected heuristic that targets its weakest decision rule.";

/// Critic text stored as the next reflection.
pub fn parse_reflection(text: &str, limit: usize, role: Role) -> (String, Option<String>) {
    let reflection = text.trim().to_string();
    let words = word_count(&reflection);
    let warning = (words > limit).then(|| format!("{role} reflection has {words} words (limit {limit})"));
    (reflection, warning)
}
