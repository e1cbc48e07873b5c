//! Step-by-step construction: at every step the heuristic scores the feasible
//! candidates and the highest score wins, ties going to the earliest candidate.

use crate::instance::{BppInstance, BppMode, Instance, InstanceData, KpInstance, TspInstance};
use crate::matrix::Matrix;
use crate::{Payload, ProblemError, Solution};

use super::{Deadline, FrameworkError, Heuristic, HeuristicFault};

/// The partial-solution state shown to a constructive heuristic.
#[derive(Debug, Clone, Copy)]
pub enum ConstructionView<'a> {
    /// Candidates are `unvisited` in ascending node order.
    Tsp { current: usize, destination: usize, unvisited: &'a [usize], dist: &'a Matrix },
    /// Candidates are the unselected items that still fit, ascending.
    Kp { remaining_capacity: f64, weights: &'a [f64], values: &'a [f64], candidates: &'a [usize] },
    /// Candidates are the remaining capacities of the open bins that fit the
    /// item, in opening order, followed by one fresh bin.
    BppOnline { item: u32, bins: &'a [f64] },
}

impl ConstructionView<'_> {
    pub fn candidate_count(&self) -> usize {
        match self {
            Self::Tsp { unvisited, .. } => unvisited.len(),
            Self::Kp { candidates, .. } => candidates.len(),
            Self::BppOnline { bins, .. } => bins.len(),
        }
    }
}

/// Index of the maximum score; the first maximum wins.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

fn pick(heuristic: &mut dyn Heuristic, view: &ConstructionView<'_>) -> Result<usize, FrameworkError> {
    let scores = heuristic.scores(view)?;
    let expected = view.candidate_count();
    if scores.len() != expected {
        return Err(HeuristicFault::InvalidOutput(format!("expected {expected} scores, got {}", scores.len())).into());
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(HeuristicFault::InvalidOutput(format!("non-finite score {s}")).into());
    }
    Ok(argmax_first(&scores).expect("at least one candidate"))
}

/// Builds a complete solution by repeated argmax over feasible candidates.
/// `start` is the TSP start node (default 0) and is ignored elsewhere.
pub fn constructive_solve(
    instance: &Instance,
    heuristic: &mut dyn Heuristic,
    start: Option<usize>,
    deadline: Deadline,
) -> Result<Solution, FrameworkError> {
    match &instance.data {
        InstanceData::Tsp(t) => construct_tsp(t, heuristic, start.unwrap_or(0), deadline),
        InstanceData::Kp(k) => construct_kp(k, heuristic, deadline),
        InstanceData::Bpp(b) if b.mode == BppMode::Online => construct_bpp(b, heuristic, deadline),
        _ => Err(ProblemError::UnsupportedPair {
            framework: crate::Framework::Constructive,
            problem: instance.problem(),
        }
        .into()),
    }
}

fn construct_tsp(
    t: &TspInstance,
    heuristic: &mut dyn Heuristic,
    start: usize,
    deadline: Deadline,
) -> Result<Solution, FrameworkError> {
    let n = t.len();
    if start >= n {
        return Err(FrameworkError::NoFeasibleCandidate(format!("start node {start} out of range")));
    }
    let mut unvisited: Vec<usize> = (0..n).filter(|&i| i != start).collect();
    let mut tour = Vec::with_capacity(n);
    tour.push(start);
    let mut current = start;
    while !unvisited.is_empty() {
        deadline.check()?;
        let view = ConstructionView::Tsp { current, destination: start, unvisited: &unvisited, dist: &t.dist };
        let k = pick(heuristic, &view)?;
        current = unvisited.remove(k);
        tour.push(current);
    }
    let objective = t.tour_length(&tour);
    Ok(Solution::new(Payload::Tour(tour), objective))
}

fn construct_kp(k: &KpInstance, heuristic: &mut dyn Heuristic, deadline: Deadline) -> Result<Solution, FrameworkError> {
    let n = k.values.len();
    let mut taken = vec![false; n];
    let mut remaining = k.capacity;
    let mut chosen = Vec::new();
    let mut value = 0.0;
    loop {
        let candidates: Vec<usize> = (0..n).filter(|&i| !taken[i] && k.weights[i] <= remaining).collect();
        if candidates.is_empty() {
            break;
        }
        deadline.check()?;
        let view = ConstructionView::Kp {
            remaining_capacity: remaining,
            weights: &k.weights,
            values: &k.values,
            candidates: &candidates,
        };
        let item = candidates[pick(heuristic, &view)?];
        taken[item] = true;
        remaining -= k.weights[item];
        value += k.values[item];
        chosen.push(item);
    }
    Ok(Solution::new(Payload::Items(chosen), value))
}

fn construct_bpp(
    b: &BppInstance,
    heuristic: &mut dyn Heuristic,
    deadline: Deadline,
) -> Result<Solution, FrameworkError> {
    check_items_fit(b)?;
    let mut remaining: Vec<u32> = Vec::new();
    let mut labels = Vec::with_capacity(b.sizes.len());
    let mut open: Vec<usize> = Vec::new();
    let mut caps: Vec<f64> = Vec::new();
    for &size in &b.sizes {
        deadline.check()?;
        open.clear();
        caps.clear();
        for (i, &r) in remaining.iter().enumerate() {
            if r >= size {
                open.push(i);
                caps.push(f64::from(r));
            }
        }
        caps.push(f64::from(b.capacity));
        let k = pick(heuristic, &ConstructionView::BppOnline { item: size, bins: &caps })?;
        let bin = if k < open.len() {
            open[k]
        } else {
            remaining.push(b.capacity);
            remaining.len() - 1
        };
        remaining[bin] -= size;
        labels.push(bin);
    }
    Ok(Solution::new(Payload::Bins(labels), remaining.len() as f64))
}

fn check_items_fit(b: &BppInstance) -> Result<(), ProblemError> {
    match b.sizes.iter().enumerate().find(|(_, &s)| s > b.capacity) {
        Some((item, &size)) => Err(ProblemError::ItemExceedsCapacity { item, size, capacity: b.capacity }),
        None => Ok(()),
    }
}

/// Native nearest-neighbour tour from `start`; distance ties go to the lowest node.
pub fn nearest_neighbor_tour(t: &TspInstance, start: usize) -> Vec<usize> {
    let n = t.len();
    let mut visited = vec![false; n];
    let mut tour = Vec::with_capacity(n);
    let mut cur = start;
    visited[cur] = true;
    tour.push(cur);
    for _ in 1..n {
        let row = t.dist.row(cur);
        let mut next = usize::MAX;
        for j in 0..n {
            if !visited[j] && (next == usize::MAX || row[j] < row[next]) {
                next = j;
            }
        }
        visited[next] = true;
        tour.push(next);
        cur = next;
    }
    tour
}

/// Nearest-neighbour construction: score = negative distance from the current node.
#[derive(Debug, Clone, Copy, Default)]
pub struct NearestNeighbor;

impl Heuristic for NearestNeighbor {
    fn scores(&mut self, view: &ConstructionView<'_>) -> Result<Vec<f64>, HeuristicFault> {
        match view {
            ConstructionView::Tsp { current, unvisited, dist, .. } => {
                Ok(unvisited.iter().map(|&j| -dist.get(*current, j)).collect())
            }
            _ => Err(HeuristicFault::Runtime("nearest neighbour only scores TSP".into())),
        }
    }
}

/// Value-density greedy: score = value / weight.
#[derive(Debug, Clone, Copy, Default)]
pub struct ValueDensity;

impl Heuristic for ValueDensity {
    fn scores(&mut self, view: &ConstructionView<'_>) -> Result<Vec<f64>, HeuristicFault> {
        match view {
            ConstructionView::Kp { weights, values, candidates, .. } => {
                Ok(candidates.iter().map(|&i| density(values[i], weights[i])).collect())
            }
            _ => Err(HeuristicFault::Runtime("value density only scores KP".into())),
        }
    }
}

fn density(value: f64, weight: f64) -> f64 {
    if weight > 0.0 {
        value / weight
    } else {
        f64::MAX
    }
}

/// Best Fit for online bin packing: place each item in the fullest bin that fits.
pub fn baseline_best_fit(instance: &BppInstance) -> Result<Solution, ProblemError> {
    online_fit(instance, |remaining, size| {
        remaining.iter().enumerate().filter(|(_, &r)| r >= size).min_by_key(|(i, &r)| (r - size, *i)).map(|(i, _)| i)
    })
}

/// First Fit for online bin packing: place each item in the earliest bin that fits.
pub fn baseline_first_fit(instance: &BppInstance) -> Result<Solution, ProblemError> {
    online_fit(instance, |remaining, size| remaining.iter().position(|&r| r >= size))
}

fn online_fit(b: &BppInstance, choose: impl Fn(&[u32], u32) -> Option<usize>) -> Result<Solution, ProblemError> {
    check_items_fit(b)?;
    let mut remaining: Vec<u32> = Vec::new();
    let mut labels = Vec::with_capacity(b.sizes.len());
    for &size in &b.sizes {
        let bin = match choose(&remaining, size) {
            Some(bin) => bin,
            None => {
                remaining.push(b.capacity);
                remaining.len() - 1
            }
        };
        remaining[bin] -= size;
        labels.push(bin);
    }
    Ok(Solution::new(Payload::Bins(labels), remaining.len() as f64))
}
