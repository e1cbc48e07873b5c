//! Heuristic evolution over an entailment graph: a policy picks parents and
//! a directive, a world model writes rollouts, critics route reflections.

pub mod agents;
pub mod demo;
pub mod graph;
pub mod llm;
pub mod orchestrator;

pub use agents::{ActionProposal, ActionSummary, CodeReply, PolicyParseError, TaskContext};
pub use graph::{
    apply_entailment, frontier_update, init_graph, leaf_nodes, next_population, selection_diversity_rate, DiscardPool,
    EntailmentEdge, EntailmentGraph, Frontier, GraphError, GraphNode, GraphSnapshot, NodeId, ParentMeta,
};
pub use llm::{
    Backend, ChatRequest, ChatResult, HttpBackend, LlmError, MockBackend, MockScript, Role, TokenLedger, Transcript,
};
pub use orchestrator::{
    epsilon, run_config, select_initial, ConfigError, Evaluator, Orchestrator, RunConfig, RunOutcome, SandboxEvaluator,
};
