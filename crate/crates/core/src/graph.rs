//! Entailment graph: nodes, derivation edges, the active frontier, leaf-first
//! population selection and the selection diversity rate.

use std::collections::{BTreeSet, HashMap};

use pathwise_sandbox::{EvalStatus, Fitness, HeuristicProgram};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = String;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("duplicate node id `{0}`")]
    DuplicateId(NodeId),
    #[error("parent `{0}` is not in the frontier")]
    ParentOutsideFrontier(NodeId),
    #[error("an entailment needs at least one parent")]
    EmptyParents,
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
}

/// Description and fitness of one parent, recorded on the child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentMeta {
    pub description: String,
    pub fitness: Fitness,
}

/// A heuristic with its derivation metadata: (h, kappa, d, P, PM).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: NodeId,
    pub program: HeuristicProgram,
    /// Derivation rationale.
    pub kappa: String,
    /// Short description `d`.
    pub description: String,
    pub perf: Fitness,
    pub status: EvalStatus,
    pub pm: Vec<ParentMeta>,
}

/// `parents => child` under rationale `kappa`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntailmentEdge {
    pub parents: Vec<NodeId>,
    pub child: NodeId,
    pub kappa: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntailmentGraph {
    nodes: Vec<GraphNode>,
    edges: Vec<EntailmentEdge>,
    #[serde(skip)]
    index: HashMap<NodeId, usize>,
}

impl EntailmentGraph {
    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EntailmentEdge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Incoming edges of `id` (at most one).
    pub fn incoming(&self, id: &str) -> impl Iterator<Item = &EntailmentEdge> {
        let id = id.to_string();
        self.edges.iter().filter(move |e| e.child == id)
    }

    /// Whether `id` is a parent in some edge.
    pub fn has_outgoing(&self, id: &str) -> bool {
        self.edges.iter().any(|e| e.parents.iter().any(|p| p == id))
    }

    /// Node with the highest fitness; ties go to the earliest inserted.
    pub fn best(&self) -> Option<&GraphNode> {
        best_of(self.nodes.iter())
    }

    fn insert(&mut self, node: GraphNode) -> Result<(), GraphError> {
        if self.index.contains_key(&node.id) {
            return Err(GraphError::DuplicateId(node.id));
        }
        self.index.insert(node.id.clone(), self.nodes.len());
        self.nodes.push(node);
        Ok(())
    }

    /// Rebuilds the id index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
    }
}

/// First node with the maximum fitness.
pub fn best_of<'a>(nodes: impl IntoIterator<Item = &'a GraphNode>) -> Option<&'a GraphNode> {
    nodes.into_iter().fold(None, |best: Option<&GraphNode>, n| match best {
        Some(b) if b.perf >= n.perf => Some(b),
        _ => Some(n),
    })
}

/// The active frontier `s_t`, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frontier {
    ids: Vec<NodeId>,
}

impl Frontier {
    pub fn from_ids(ids: impl IntoIterator<Item = NodeId>) -> Self {
        let mut f = Self::default();
        for id in ids {
            f.insert(id);
        }
        f
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.iter().any(|x| x == id)
    }

    fn insert(&mut self, id: NodeId) {
        if !self.contains(&id) {
            self.ids.push(id);
        }
    }

    pub fn as_set(&self) -> BTreeSet<NodeId> {
        self.ids.iter().cloned().collect()
    }
}

/// Evaluated rollouts that were not entailed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscardPool {
    nodes: Vec<GraphNode>,
}

impl DiscardPool {
    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds a node; it must not be part of `graph` or already pooled.
    pub fn push(&mut self, graph: &EntailmentGraph, node: GraphNode) -> Result<(), GraphError> {
        if graph.contains(&node.id) || self.nodes.iter().any(|n| n.id == node.id) {
            return Err(GraphError::DuplicateId(node.id));
        }
        self.nodes.push(node);
        Ok(())
    }
}

/// Roots only, no edges; the frontier holds every root.
pub fn init_graph(population: Vec<GraphNode>) -> Result<(EntailmentGraph, Frontier), GraphError> {
    if population.is_empty() {
        return Err(GraphError::EmptyPopulation);
    }
    let mut graph = EntailmentGraph::default();
    let mut frontier = Frontier::default();
    for node in population {
        frontier.insert(node.id.clone());
        graph.insert(node)?;
    }
    Ok((graph, frontier))
}

/// `(s_t ∪ {child}) \ (parents \ {best})`, preserving frontier order with the child last.
pub fn frontier_update(frontier: &[NodeId], parents: &[NodeId], child: &str, best: &str) -> Vec<NodeId> {
    let mut next: Vec<NodeId> = frontier.to_vec();
    if !next.iter().any(|x| x == child) {
        next.push(child.to_string());
    }
    next.retain(|x| x == best || !parents.contains(x));
    next
}

/// Inserts `child` with the edge `parents => child` and updates the frontier.
/// `best` is the id of the global best node after this step.
pub fn apply_entailment(
    graph: &mut EntailmentGraph,
    frontier: &mut Frontier,
    parents: &[NodeId],
    kappa: &str,
    child: GraphNode,
    best: &str,
) -> Result<(), GraphError> {
    if parents.is_empty() {
        return Err(GraphError::EmptyParents);
    }
    if let Some(p) = parents.iter().find(|p| !frontier.contains(p)) {
        return Err(GraphError::ParentOutsideFrontier(p.clone()));
    }
    if graph.contains(&child.id) {
        return Err(GraphError::DuplicateId(child.id));
    }
    let child_id = child.id.clone();
    graph.insert(child)?;
    graph.edges.push(EntailmentEdge { parents: parents.to_vec(), child: child_id.clone(), kappa: kappa.to_string() });
    let next = frontier_update(frontier.ids(), parents, &child_id, best);
    frontier.ids = next;
    Ok(())
}

/// Nodes without outgoing edges that are the child of some edge.
pub fn leaf_nodes(graph: &EntailmentGraph) -> Vec<&GraphNode> {
    graph.nodes.iter().filter(|n| graph.incoming(&n.id).next().is_some() && !graph.has_outgoing(&n.id)).collect()
}

fn ranked<'a>(nodes: impl IntoIterator<Item = &'a GraphNode>) -> Vec<&'a GraphNode> {
    let mut v: Vec<&GraphNode> = nodes.into_iter().filter(|n| !n.perf.is_sentinel()).collect();
    v.sort_by_key(|n| std::cmp::Reverse(n.perf));
    v
}

fn perf_key(f: Fitness) -> Option<u64> {
    f.value().map(f64::to_bits)
}

/// Leaf-first selection: the best `n_p` leaves when there are enough,
/// otherwise all leaves plus the best other nodes (graph and discard pool)
/// whose fitness differs from every node selected so far. Failed nodes are
/// never selected; fewer than `n_p` nodes are returned when too few qualify.
pub fn next_population(graph: &EntailmentGraph, discard: &DiscardPool, n_p: usize) -> Vec<GraphNode> {
    let leaves = leaf_nodes(graph);
    let leaf_ids: BTreeSet<&str> = leaves.iter().map(|n| n.id.as_str()).collect();
    let f = ranked(leaves.iter().copied());
    if f.len() >= n_p {
        return f.into_iter().take(n_p).cloned().collect();
    }
    let mut chosen: Vec<GraphNode> = f.into_iter().cloned().collect();
    let mut seen: BTreeSet<u64> = chosen.iter().filter_map(|n| perf_key(n.perf)).collect();
    let rest = ranked(graph.nodes.iter().chain(discard.nodes.iter()).filter(|n| !leaf_ids.contains(n.id.as_str())));
    for node in rest {
        if chosen.len() >= n_p {
            break;
        }
        if let Some(key) = perf_key(node.perf) {
            if seen.insert(key) {
                chosen.push(node.clone());
            }
        }
    }
    if chosen.len() < n_p {
        log::warn!("next population has {} of {n_p} nodes: not enough distinct finite fitness values", chosen.len());
    }
    chosen
}

/// Unique parent sets (order-insensitive) over total selections; `None` for an empty log.
pub fn selection_diversity_rate<S: AsRef<str>>(selections: &[Vec<S>]) -> Option<f64> {
    if selections.is_empty() {
        return None;
    }
    let unique: BTreeSet<BTreeSet<&str>> = selections.iter().map(|s| s.iter().map(|x| x.as_ref()).collect()).collect();
    Some(unique.len() as f64 / selections.len() as f64)
}

/// Serializable view of one outer round, written after the round finishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub round: usize,
    pub steps: usize,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<EntailmentEdge>,
    pub frontier: Vec<NodeId>,
    pub discarded: Vec<GraphNode>,
    pub leaves: Vec<NodeId>,
    pub next_population: Vec<NodeId>,
}

impl GraphSnapshot {
    pub fn new(
        round: usize,
        steps: usize,
        graph: &EntailmentGraph,
        frontier: &Frontier,
        discard: &DiscardPool,
        next: &[GraphNode],
    ) -> Self {
        Self {
            round,
            steps,
            nodes: graph.nodes.clone(),
            edges: graph.edges.clone(),
            frontier: frontier.ids.clone(),
            discarded: discard.nodes.clone(),
            leaves: leaf_nodes(graph).into_iter().map(|n| n.id.clone()).collect(),
            next_population: next.iter().map(|n| n.id.clone()).collect(),
        }
    }
}
