use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::instance::{closed_length, Instance, InstanceData};
use crate::ProblemError;

/// Absolute slack allowed on floating-point capacity and budget checks.
pub const FEASIBILITY_EPS: f64 = 1e-9;
/// Maximum disagreement between a reported and a recomputed objective.
pub const OBJECTIVE_EPS: f64 = 1e-9;

/// Problem-specific solution payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    /// TSP: a permutation of all nodes.
    Tour(Vec<usize>),
    /// KP and MKP: indices of the selected items.
    Items(Vec<usize>),
    /// CVRP: customer sequences, each implicitly starting and ending at the depot.
    Routes(Vec<Vec<usize>>),
    /// OP: node sequence starting and ending at the depot (node 0).
    Path(Vec<usize>),
    /// BPP: bin label of every item, in item order.
    Bins(Vec<usize>),
}

/// A solution with its native objective (cost for minimization problems,
/// reward for maximization problems).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub payload: Payload,
    pub objective: f64,
}

impl Solution {
    pub fn new(payload: Payload, objective: f64) -> Self {
        Self { payload, objective }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Short name of the violated constraint, e.g. `capacity`.
    pub constraint: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.constraint, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violation: Option<Violation>,
    /// Objective recomputed from the payload, when the payload is feasible.
    pub objective: Option<f64>,
}

impl FeasibilityReport {
    fn violated(constraint: &str, detail: impl Into<String>) -> Self {
        Self {
            feasible: false,
            violation: Some(Violation { constraint: constraint.to_string(), detail: detail.into() }),
            objective: None,
        }
    }
}

/// Checks every constraint of the problem's formulation and recomputes the objective.
pub fn verify_solution(instance: &Instance, sol: &Solution) -> Result<FeasibilityReport, ProblemError> {
    let outcome = match (&instance.data, &sol.payload) {
        (InstanceData::Tsp(t), Payload::Tour(tour)) => {
            check_permutation(tour, t.len(), "tour").map(|()| closed_length(&t.dist, tour))
        }
        (InstanceData::Kp(kp), Payload::Items(items)) => {
            check_distinct(items, kp.values.len(), "item").and_then(|()| {
                let weight: f64 = items.iter().map(|&i| kp.weights[i]).sum();
                if weight > kp.capacity + FEASIBILITY_EPS {
                    return Err(FeasibilityReport::violated(
                        "capacity",
                        format!("total weight {weight} exceeds capacity {}", kp.capacity),
                    ));
                }
                Ok(items.iter().map(|&i| kp.values[i]).sum())
            })
        }
        (InstanceData::Mkp(mkp), Payload::Items(items)) => {
            check_distinct(items, mkp.values.len(), "item").and_then(|()| {
                for (j, &cap) in mkp.capacities.iter().enumerate() {
                    let load: f64 = items.iter().map(|&i| mkp.weights.get(i, j)).sum();
                    if load > cap + FEASIBILITY_EPS {
                        return Err(FeasibilityReport::violated(
                            "capacity",
                            format!("knapsack {j} load {load} exceeds capacity {cap}"),
                        ));
                    }
                }
                Ok(items.iter().map(|&i| mkp.values[i]).sum())
            })
        }
        (InstanceData::Cvrp(c), Payload::Routes(routes)) => {
            let all: Vec<usize> = routes.iter().flatten().copied().collect();
            if all.contains(&0) {
                Err(FeasibilityReport::violated("depot", "depot appears inside a route"))
            } else {
                let shifted: Vec<usize> = all.iter().map(|&i| i.wrapping_sub(1)).collect();
                check_permutation(&shifted, c.customers(), "customer").and_then(|()| {
                    let mut cost = 0.0;
                    for (r, route) in routes.iter().enumerate() {
                        let demand: f64 = route.iter().map(|&i| f64::from(c.demands[i])).sum();
                        if demand > c.capacity + FEASIBILITY_EPS {
                            return Err(FeasibilityReport::violated(
                                "capacity",
                                format!("route {r} demand {demand} exceeds capacity {}", c.capacity),
                            ));
                        }
                        if let (Some(&first), Some(&last)) = (route.first(), route.last()) {
                            cost += c.dist.get(0, first) + c.dist.get(last, 0);
                            cost += route.windows(2).map(|w| c.dist.get(w[0], w[1])).sum::<f64>();
                        }
                    }
                    Ok(cost)
                })
            }
        }
        (InstanceData::Op(op), Payload::Path(path)) => {
            if path.len() < 2 || path[0] != 0 || *path.last().unwrap() != 0 {
                Err(FeasibilityReport::violated("depot", "path must start and end at the depot"))
            } else {
                let inner = &path[1..path.len() - 1];
                let n = op.prizes.len();
                if inner.contains(&0) {
                    Err(FeasibilityReport::violated("visit-once", "depot visited mid-path"))
                } else {
                    check_distinct(inner, n, "node").and_then(|()| {
                        let length: f64 = path.windows(2).map(|w| op.dist.get(w[0], w[1])).sum();
                        let length = if path.len() == 2 { 0.0 } else { length };
                        if length > op.budget + FEASIBILITY_EPS {
                            return Err(FeasibilityReport::violated(
                                "budget",
                                format!("path length {length} exceeds budget {}", op.budget),
                            ));
                        }
                        Ok(inner.iter().map(|&i| op.prizes[i]).sum())
                    })
                }
            }
        }
        (InstanceData::Bpp(b), Payload::Bins(bins)) => {
            if bins.len() != b.sizes.len() {
                Err(FeasibilityReport::violated(
                    "assignment",
                    format!("{} assignments for {} items", bins.len(), b.sizes.len()),
                ))
            } else {
                let mut loads: BTreeMap<usize, u64> = BTreeMap::new();
                for (&bin, &size) in bins.iter().zip(&b.sizes) {
                    *loads.entry(bin).or_default() += u64::from(size);
                }
                match loads.iter().find(|(_, &load)| load > u64::from(b.capacity)) {
                    Some((bin, load)) => Err(FeasibilityReport::violated(
                        "capacity",
                        format!("bin {bin} load {load} exceeds capacity {}", b.capacity),
                    )),
                    None => Ok(loads.len() as f64),
                }
            }
        }
        (data, payload) => {
            return Err(ProblemError::ShapeMismatch(format!(
                "{} instance cannot hold a {} payload",
                problem_of(data),
                payload_kind(payload)
            )))
        }
    };
    Ok(match outcome {
        Err(report) => report,
        Ok(objective) if (objective - sol.objective).abs() > OBJECTIVE_EPS => {
            FeasibilityReport::violated("objective", format!("reported {} but recomputed {objective}", sol.objective))
        }
        Ok(objective) => FeasibilityReport { feasible: true, violation: None, objective: Some(objective) },
    })
}

fn problem_of(data: &InstanceData) -> &'static str {
    match data {
        InstanceData::Tsp(_) => "tsp",
        InstanceData::Kp(_) => "kp",
        InstanceData::Cvrp(_) => "cvrp",
        InstanceData::Mkp(_) => "mkp",
        InstanceData::Op(_) => "op",
        InstanceData::Bpp(_) => "bpp",
    }
}

fn payload_kind(p: &Payload) -> &'static str {
    match p {
        Payload::Tour(_) => "tour",
        Payload::Items(_) => "items",
        Payload::Routes(_) => "routes",
        Payload::Path(_) => "path",
        Payload::Bins(_) => "bins",
    }
}

fn check_distinct(items: &[usize], n: usize, what: &str) -> Result<(), FeasibilityReport> {
    let mut seen = HashSet::with_capacity(items.len());
    for &i in items {
        if i >= n {
            return Err(FeasibilityReport::violated("range", format!("{what} {i} out of range 0..{n}")));
        }
        if !seen.insert(i) {
            return Err(FeasibilityReport::violated("visit-once", format!("{what} {i} used twice")));
        }
    }
    Ok(())
}

fn check_permutation(items: &[usize], n: usize, what: &str) -> Result<(), FeasibilityReport> {
    check_distinct(items, n, what)?;
    if items.len() != n {
        return Err(FeasibilityReport::violated("visit-once", format!("{} of {n} {what}s visited", items.len())));
    }
    Ok(())
}
