//! Ant colony optimization with a supplied heuristic-information array.
//!
//! Selection probability is proportional to `tau^alpha * eta^beta` over the
//! feasible moves, drawn by roulette on the cumulative sum (the first
//! candidate whose running total exceeds the uniform draw wins). After each
//! iteration every pheromone entry evaporates by `(1 - rho)` and every ant
//! deposits on the components it used: `1 / cost` for minimization problems
//! and its reward for maximization problems.
//!
//! Feasibility masks:
//! * TSP: unvisited nodes; each ant starts at a uniformly drawn node.
//! * CVRP: unvisited customers whose demand fits the remaining load; the
//!   depot is also selectable from a customer, and is forced when nothing fits.
//! * OP: unvisited nodes `j` with `length + d(cur, j) + d(j, 0) <= budget`;
//!   the ant returns to the depot when the mask is empty.
//! * MKP: unselected items that fit every knapsack (item-level pheromone).
//! * Offline BPP: an empty bin starts with any unpacked item, weighted by
//!   start pheromone and `size / capacity`; afterwards items that fit the bin
//!   are weighted by the pair pheromone and `eta[last][j]`. A bin closes when
//!   no unpacked item fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::instance::{BppInstance, CvrpInstance, Instance, InstanceData, MkpInstance, OpInstance, TspInstance};
use crate::matrix::Matrix;
use crate::{Payload, ProblemError, Solution};

use super::{check_knowledge, Deadline, FrameworkError, Knowledge, RunOutcome};

const FEASIBILITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcoParams {
    pub n_ants: usize,
    pub n_iterations: usize,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub tau0: f64,
}

impl Default for AcoParams {
    fn default() -> Self {
        Self { n_ants: 30, n_iterations: 100, alpha: 1.0, beta: 1.0, rho: 0.1, tau0: 1.0 }
    }
}

impl AcoParams {
    pub fn validate(&self) -> Result<(), ProblemError> {
        let bad = |m: &str| Err(ProblemError::InvalidParams(m.to_string()));
        if self.n_ants == 0 || self.n_iterations == 0 {
            return bad("ACO needs n_ants >= 1 and n_iterations >= 1");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("ACO rho must lie in (0, 1)");
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return bad("ACO alpha and beta must be finite and non-negative");
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return bad("ACO tau0 must be positive");
        }
        Ok(())
    }
}

/// Probabilities implied by non-negative selection weights. An all-zero (or
/// non-finite) total falls back to the uniform distribution.
pub fn selection_probabilities(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    if total > 0.0 && total.is_finite() {
        weights.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / weights.len() as f64; weights.len()]
    }
}

/// Roulette draw over non-negative weights; returns `(index, fell_back_to_uniform)`.
pub fn roulette<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> (usize, bool) {
    debug_assert!(!weights.is_empty());
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return (rng.gen_range(0..weights.len()), true);
    }
    let r = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if acc > r {
            return (i, false);
        }
    }
    (last_positive, false)
}

#[inline]
fn pow(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if e == 0.0 {
        1.0
    } else {
        x.powf(e)
    }
}

/// Optimization sense of the colony's objective.
#[derive(Clone, Copy, PartialEq)]
enum Sense {
    Min,
    Max,
}

impl Sense {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Min => a < b,
            Sense::Max => a > b,
        }
    }

    fn deposit(self, objective: f64) -> f64 {
        match self {
            Sense::Min => 1.0 / objective,
            Sense::Max => objective,
        }
    }
}

struct Colony<'a> {
    params: &'a AcoParams,
    rng: ChaCha8Rng,
    deadline: Deadline,
    fallbacks: usize,
    weights: Vec<f64>,
}

impl Colony<'_> {
    fn choose(&mut self, weights_of: impl Fn(usize) -> f64, candidates: &[usize]) -> usize {
        self.weights.clear();
        self.weights.extend(candidates.iter().map(|&j| weights_of(j)));
        let (k, fell_back) = roulette(&self.weights, &mut self.rng);
        self.fallbacks += usize::from(fell_back);
        candidates[k]
    }
}

/// Runs the colony and returns the best solution plus the best-so-far curve
/// (one value per iteration).
pub fn aco_run(
    instance: &Instance,
    eta: &Knowledge,
    params: &AcoParams,
    seed: u64,
    deadline: Deadline,
) -> Result<RunOutcome, FrameworkError> {
    params.validate()?;
    let mut colony =
        Colony { params, rng: ChaCha8Rng::seed_from_u64(seed), deadline, fallbacks: 0, weights: Vec::new() };
    let outcome = match (&instance.data, eta) {
        (InstanceData::Tsp(t), Knowledge::Matrix(m)) => run_tsp(t, m, &mut colony),
        (InstanceData::Cvrp(c), Knowledge::Matrix(m)) => run_cvrp(c, m, &mut colony),
        (InstanceData::Op(o), Knowledge::Matrix(m)) => run_op(o, m, &mut colony),
        (InstanceData::Mkp(k), Knowledge::Vector(v)) => run_mkp(k, v, &mut colony),
        (InstanceData::Bpp(b), Knowledge::Matrix(m)) => run_bpp(b, m, &mut colony),
        (InstanceData::Kp(_), _) => {
            return Err(
                ProblemError::UnsupportedPair { framework: crate::Framework::Aco, problem: instance.problem() }.into()
            )
        }
        (_, Knowledge::Matrix(_)) => return Err(FrameworkError::invalid("expected an item vector, got a matrix")),
        (_, Knowledge::Vector(_)) => return Err(FrameworkError::invalid("expected a matrix, got a vector")),
    }?;
    if colony.fallbacks > 0 {
        log::debug!("ACO fell back to uniform selection {} times on {}", colony.fallbacks, instance.id());
    }
    Ok(outcome)
}

fn check_square(eta: &Matrix, n: usize) -> Result<(), FrameworkError> {
    if eta.rows() != n || eta.cols() != n {
        return Err(FrameworkError::invalid(format!("expected a {n}x{n} matrix, got {}x{}", eta.rows(), eta.cols())));
    }
    check_knowledge(eta.as_slice(), "heuristic matrix")
}

fn powered(eta: &Matrix, beta: f64) -> Matrix {
    let mut out = eta.clone();
    out.as_mut_slice().iter_mut().for_each(|x| *x = pow(*x, beta));
    out
}

/// `tau^alpha * eta_beta`, elementwise.
fn combine(tau: &Matrix, eta_beta: &Matrix, alpha: f64) -> Matrix {
    let mut out = eta_beta.clone();
    for (o, &t) in out.as_mut_slice().iter_mut().zip(tau.as_slice()) {
        *o *= pow(t, alpha);
    }
    out
}

/// Multiplies every pheromone entry by `1 - rho`.
pub fn evaporate(tau: &mut [f64], rho: f64) {
    tau.iter_mut().for_each(|t| *t *= 1.0 - rho);
}

/// Shared iteration loop: `build` constructs one ant's solution with its
/// component trail, `deposit` lays pheromone for one ant.
fn iterate<S: Clone>(
    colony: &mut Colony<'_>,
    sense: Sense,
    mut build: impl FnMut(&mut Colony<'_>) -> (S, f64),
    mut deposit: impl FnMut(&S, f64),
    mut evaporate_all: impl FnMut(f64),
    mut refresh: impl FnMut(),
) -> Result<(S, f64, Vec<f64>), FrameworkError> {
    let mut best: Option<(S, f64)> = None;
    let mut curve = Vec::with_capacity(colony.params.n_iterations);
    let mut ants = Vec::with_capacity(colony.params.n_ants);
    for _ in 0..colony.params.n_iterations {
        refresh();
        ants.clear();
        for _ in 0..colony.params.n_ants {
            colony.deadline.check()?;
            let (sol, obj) = build(colony);
            if best.as_ref().is_none_or(|(_, b)| sense.better(obj, *b)) {
                best = Some((sol.clone(), obj));
            }
            ants.push((sol, obj));
        }
        evaporate_all(colony.params.rho);
        for (sol, obj) in &ants {
            deposit(sol, sense.deposit(*obj));
        }
        curve.push(best.as_ref().expect("at least one ant").1);
    }
    let (sol, obj) = best.expect("at least one iteration");
    Ok((sol, obj, curve))
}

fn run_tsp(t: &TspInstance, eta: &Matrix, colony: &mut Colony<'_>) -> Result<RunOutcome, FrameworkError> {
    let n = t.len();
    check_square(eta, n)?;
    let (alpha, beta, tau0) = (colony.params.alpha, colony.params.beta, colony.params.tau0);
    let eta_beta = powered(eta, beta);
    let tau = std::cell::RefCell::new(Matrix::filled(n, n, tau0));
    let w = std::cell::RefCell::new(Matrix::zeros(n, n));
    let (tour, obj, curve) = iterate(
        colony,
        Sense::Min,
        |c| {
            let w = w.borrow();
            let start = c.rng.gen_range(0..n);
            let mut unvisited: Vec<usize> = (0..n).filter(|&j| j != start).collect();
            let mut tour = Vec::with_capacity(n);
            tour.push(start);
            let mut cur = start;
            while !unvisited.is_empty() {
                let row = w.row(cur);
                let next = c.choose(|j| row[j], &unvisited);
                unvisited.retain(|&j| j != next);
                tour.push(next);
                cur = next;
            }
            let len = t.tour_length(&tour);
            (tour, len)
        },
        |tour, amount| {
            let mut tau = tau.borrow_mut();
            for k in 0..tour.len() {
                let (a, b) = (tour[k], tour[(k + 1) % tour.len()]);
                tau.add(a, b, amount);
                tau.add(b, a, amount);
            }
        },
        |rho| evaporate(tau.borrow_mut().as_mut_slice(), rho),
        || *w.borrow_mut() = combine(&tau.borrow(), &eta_beta, alpha),
    )?;
    Ok(RunOutcome { solution: Solution::new(Payload::Tour(tour), obj), curve })
}

fn run_cvrp(c: &CvrpInstance, eta: &Matrix, colony: &mut Colony<'_>) -> Result<RunOutcome, FrameworkError> {
    let nodes = c.coords.len();
    check_square(eta, nodes)?;
    let (alpha, tau0) = (colony.params.alpha, colony.params.tau0);
    let eta_beta = powered(eta, colony.params.beta);
    let tau = std::cell::RefCell::new(Matrix::filled(nodes, nodes, tau0));
    let w = std::cell::RefCell::new(Matrix::zeros(nodes, nodes));
    let (seq, obj, curve) = iterate(
        colony,
        Sense::Min,
        |col| {
            let w = w.borrow();
            let mut unvisited: Vec<usize> = (1..nodes).collect();
            let mut seq = vec![0usize];
            let mut load = c.capacity;
            let mut cur = 0;
            let mut cands = Vec::with_capacity(nodes);
            while !unvisited.is_empty() {
                cands.clear();
                cands.extend(unvisited.iter().copied().filter(|&j| f64::from(c.demands[j]) <= load + FEASIBILITY_EPS));
                let next = if cands.is_empty() {
                    0
                } else {
                    if cur != 0 {
                        cands.push(0);
                    }
                    let row = w.row(cur);
                    col.choose(|j| row[j], &cands)
                };
                if next == 0 {
                    load = c.capacity;
                } else {
                    load -= f64::from(c.demands[next]);
                    unvisited.retain(|&j| j != next);
                }
                seq.push(next);
                cur = next;
            }
            seq.push(0);
            let len: f64 = seq.windows(2).map(|e| c.dist.get(e[0], e[1])).sum();
            (seq, len)
        },
        |seq, amount| {
            let mut tau = tau.borrow_mut();
            for e in seq.windows(2) {
                tau.add(e[0], e[1], amount);
                tau.add(e[1], e[0], amount);
            }
        },
        |rho| evaporate(tau.borrow_mut().as_mut_slice(), rho),
        || *w.borrow_mut() = combine(&tau.borrow(), &eta_beta, alpha),
    )?;
    let routes: Vec<Vec<usize>> = seq.split(|&v| v == 0).filter(|r| !r.is_empty()).map(<[usize]>::to_vec).collect();
    Ok(RunOutcome { solution: Solution::new(Payload::Routes(routes), obj), curve })
}

fn run_op(o: &OpInstance, eta: &Matrix, colony: &mut Colony<'_>) -> Result<RunOutcome, FrameworkError> {
    let n = o.prizes.len();
    check_square(eta, n)?;
    let (alpha, tau0) = (colony.params.alpha, colony.params.tau0);
    let eta_beta = powered(eta, colony.params.beta);
    let tau = std::cell::RefCell::new(Matrix::filled(n, n, tau0));
    let w = std::cell::RefCell::new(Matrix::zeros(n, n));
    let (path, obj, curve) = iterate(
        colony,
        Sense::Max,
        |col| {
            let w = w.borrow();
            let mut visited = vec![false; n];
            visited[0] = true;
            let mut path = vec![0usize];
            let (mut cur, mut len, mut reward) = (0usize, 0.0f64, 0.0f64);
            let mut cands = Vec::with_capacity(n);
            loop {
                cands.clear();
                cands.extend((1..n).filter(|&j| {
                    !visited[j] && len + o.dist.get(cur, j) + o.dist.get(j, 0) <= o.budget + FEASIBILITY_EPS
                }));
                if cands.is_empty() {
                    break;
                }
                let row = w.row(cur);
                let next = col.choose(|j| row[j], &cands);
                visited[next] = true;
                len += o.dist.get(cur, next);
                reward += o.prizes[next];
                path.push(next);
                cur = next;
            }
            path.push(0);
            (path, reward)
        },
        |path, amount| {
            let mut tau = tau.borrow_mut();
            for e in path.windows(2) {
                if e[0] != e[1] {
                    tau.add(e[0], e[1], amount);
                    tau.add(e[1], e[0], amount);
                }
            }
        },
        |rho| evaporate(tau.borrow_mut().as_mut_slice(), rho),
        || *w.borrow_mut() = combine(&tau.borrow(), &eta_beta, alpha),
    )?;
    Ok(RunOutcome { solution: Solution::new(Payload::Path(path), obj), curve })
}

fn run_mkp(k: &MkpInstance, eta: &[f64], colony: &mut Colony<'_>) -> Result<RunOutcome, FrameworkError> {
    let n = k.values.len();
    let m = k.knapsacks();
    if eta.len() != n {
        return Err(FrameworkError::invalid(format!("expected {n} item values, got {}", eta.len())));
    }
    check_knowledge(eta, "heuristic vector")?;
    let (alpha, tau0) = (colony.params.alpha, colony.params.tau0);
    let eta_beta: Vec<f64> = eta.iter().map(|&x| pow(x, colony.params.beta)).collect();
    let tau = std::cell::RefCell::new(vec![tau0; n]);
    let w = std::cell::RefCell::new(vec![0.0; n]);
    let (items, obj, curve) = iterate(
        colony,
        Sense::Max,
        |col| {
            let w = w.borrow();
            let mut taken = vec![false; n];
            let mut load = vec![0.0; m];
            let mut items = Vec::new();
            let mut reward = 0.0;
            let mut cands = Vec::with_capacity(n);
            loop {
                cands.clear();
                cands.extend((0..n).filter(|&i| {
                    !taken[i] && (0..m).all(|j| load[j] + k.weights.get(i, j) <= k.capacities[j] + FEASIBILITY_EPS)
                }));
                if cands.is_empty() {
                    break;
                }
                let i = col.choose(|i| w[i], &cands);
                taken[i] = true;
                for (j, l) in load.iter_mut().enumerate() {
                    *l += k.weights.get(i, j);
                }
                reward += k.values[i];
                items.push(i);
            }
            (items, reward)
        },
        |items, amount| {
            let mut tau = tau.borrow_mut();
            for &i in items {
                tau[i] += amount;
            }
        },
        |rho| evaporate(&mut tau.borrow_mut(), rho),
        || {
            let tau = tau.borrow();
            let mut w = w.borrow_mut();
            for i in 0..n {
                w[i] = pow(tau[i], alpha) * eta_beta[i];
            }
        },
    )?;
    Ok(RunOutcome { solution: Solution::new(Payload::Items(items), obj), curve })
}

fn run_bpp(b: &BppInstance, eta: &Matrix, colony: &mut Colony<'_>) -> Result<RunOutcome, FrameworkError> {
    let n = b.sizes.len();
    check_square(eta, n)?;
    if let Some((item, &size)) = b.sizes.iter().enumerate().find(|(_, &s)| s > b.capacity) {
        return Err(ProblemError::ItemExceedsCapacity { item, size, capacity: b.capacity }.into());
    }
    let (alpha, beta, tau0) = (colony.params.alpha, colony.params.beta, colony.params.tau0);
    let eta_beta = powered(eta, beta);
    let start_eta: Vec<f64> = b.sizes.iter().map(|&s| pow(f64::from(s) / f64::from(b.capacity), beta)).collect();
    // Row `n` of the pheromone matrix holds the bin-start pheromone.
    let tau = std::cell::RefCell::new(Matrix::filled(n + 1, n, tau0));
    let ((labels, _), obj, curve) = iterate(
        colony,
        Sense::Min,
        |col| {
            let tau = tau.borrow();
            let mut labels = vec![usize::MAX; n];
            let mut order = Vec::with_capacity(n);
            let mut bins = 0usize;
            let mut cands = Vec::with_capacity(n);
            while order.len() < n {
                cands.clear();
                cands.extend((0..n).filter(|&j| labels[j] == usize::MAX));
                let start_row = tau.row(n);
                let mut last = col.choose(|j| pow(start_row[j], alpha) * start_eta[j], &cands);
                let mut room = b.capacity - b.sizes[last];
                labels[last] = bins;
                order.push(last);
                loop {
                    cands.clear();
                    cands.extend((0..n).filter(|&j| labels[j] == usize::MAX && b.sizes[j] <= room));
                    if cands.is_empty() {
                        break;
                    }
                    let (trow, erow) = (tau.row(last), eta_beta.row(last));
                    let next = col.choose(|j| pow(trow[j], alpha) * erow[j], &cands);
                    labels[next] = bins;
                    room -= b.sizes[next];
                    order.push(next);
                    last = next;
                }
                bins += 1;
            }
            ((labels, order), bins as f64)
        },
        |(labels, order), amount| {
            let mut tau = tau.borrow_mut();
            let mut prev: Option<usize> = None;
            for &item in order {
                match prev {
                    Some(p) if labels[p] == labels[item] => {
                        tau.add(p, item, amount);
                        tau.add(item, p, amount);
                    }
                    _ => tau.add(n, item, amount),
                }
                prev = Some(item);
            }
        },
        |rho| evaporate(tau.borrow_mut().as_mut_slice(), rho),
        || {},
    )?;
    Ok(RunOutcome { solution: Solution::new(Payload::Bins(labels), obj), curve })
}
