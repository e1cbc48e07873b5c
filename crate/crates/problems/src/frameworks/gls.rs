//! Knowledge-guided local search for the TSP.
//!
//! The run starts from the nearest-neighbour tour improved to a local optimum
//! of the true length `f`. Each iteration then
//! 1. perturbs: repeatedly penalizes the tour edge of maximum utility
//!    `eta / (1 + p)` (or `eta * d / (1 + p)` with `general_utility`) and
//!    applies first-improvement 2-opt or relocate moves at that edge's
//!    endpoints under the augmented cost `g = d + lambda * p`, until
//!    `perturbation_moves` moves have been applied;
//! 2. improves the tour to a local optimum of `g` with 2-opt and relocate;
//! 3. records the tour if it beats the best under `f`, and then resets
//!    `lambda = lambda_alpha * f(best) / n`.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::instance::TspInstance;
use crate::matrix::Matrix;
use crate::{Payload, ProblemError, Solution};

use super::constructive::nearest_neighbor_tour;
use super::{check_finite, Deadline, FrameworkError, RunOutcome};

const IMPROVEMENT_EPS: f64 = 1e-10;
/// Penalization rounds allowed per requested perturbation move.
const ATTEMPTS_PER_MOVE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlsParams {
    pub lambda_alpha: f64,
    pub perturbation_moves: usize,
    pub n_iterations: usize,
    /// Optional wall-clock budget in seconds; the best tour so far is returned when it runs out.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<f64>,
    /// Use `eta * d / (1 + p)` as edge utility instead of `eta / (1 + p)`.
    pub general_utility: bool,
}

impl Default for GlsParams {
    fn default() -> Self {
        Self { lambda_alpha: 0.1, perturbation_moves: 30, n_iterations: 1200, time_limit: None, general_utility: false }
    }
}

impl GlsParams {
    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.perturbation_moves == 0 || self.n_iterations == 0 {
            return Err(ProblemError::InvalidParams("GLS counts must be >= 1".into()));
        }
        if !(self.lambda_alpha > 0.0 && self.lambda_alpha.is_finite()) {
            return Err(ProblemError::InvalidParams("GLS lambda_alpha must be positive".into()));
        }
        if self.time_limit.is_some_and(|t| !(t >= 0.0 && t.is_finite())) {
            return Err(ProblemError::InvalidParams("GLS time_limit must be a non-negative number".into()));
        }
        Ok(())
    }
}

/// `lambda = alpha * f(best) / n`.
pub fn gls_lambda(alpha: f64, best_length: f64, n: usize) -> f64 {
    alpha * best_length / n as f64
}

/// Symmetric integer edge penalties; entries only ever grow by one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PenaltyState {
    n: usize,
    p: Vec<u32>,
}

impl PenaltyState {
    pub fn new(n: usize) -> Self {
        Self { n, p: vec![0; n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.p[i * self.n + j]
    }

    pub fn increment(&mut self, i: usize, j: usize) {
        self.p[i * self.n + j] += 1;
        if i != j {
            self.p[j * self.n + i] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.p.iter().map(|&x| u64::from(x)).sum()
    }
}

struct Search<'a> {
    dist: &'a Matrix,
    eta: &'a Matrix,
    penalties: PenaltyState,
    lambda: f64,
    general_utility: bool,
}

impl Search<'_> {
    #[inline]
    fn w(&self, a: usize, b: usize) -> f64 {
        self.dist.get(a, b) + self.lambda * f64::from(self.penalties.get(a, b))
    }

    fn utility(&self, a: usize, b: usize) -> f64 {
        let base = if self.general_utility { self.eta.get(a, b) * self.dist.get(a, b) } else { self.eta.get(a, b) };
        base / (1.0 + f64::from(self.penalties.get(a, b)))
    }

    /// Change in augmented cost of reversing `t[i+1..=j]` (`i < j`).
    fn two_opt_delta(&self, t: &[usize], i: usize, j: usize) -> f64 {
        let n = t.len();
        let (a, b, c, d) = (t[i], t[i + 1], t[j], t[(j + 1) % n]);
        self.w(a, c) + self.w(b, d) - self.w(a, b) - self.w(c, d)
    }

    /// Change in augmented cost of moving `t[i]` between `t[j]` and `t[j+1]`.
    fn relocate_delta(&self, t: &[usize], i: usize, j: usize) -> f64 {
        let n = t.len();
        let (prev, x, next) = (t[(i + n - 1) % n], t[i], t[(i + 1) % n]);
        let (a, b) = (t[j], t[(j + 1) % n]);
        let removal = self.w(prev, next) - self.w(prev, x) - self.w(x, next);
        let insertion = self.w(a, x) + self.w(x, b) - self.w(a, b);
        removal + insertion
    }

    fn two_opt_valid(n: usize, i: usize, j: usize) -> bool {
        i < j && j - i >= 2 && !(i == 0 && j == n - 1)
    }

    fn relocate_valid(n: usize, i: usize, j: usize) -> bool {
        j != i && j != (i + n - 1) % n
    }

    /// Full 2-opt + relocate first-improvement descent to a local optimum of `g`.
    fn local_search(&self, t: &mut Vec<usize>, deadline: &Deadline) -> Result<(), FrameworkError> {
        let n = t.len();
        if n < 4 {
            return Ok(());
        }
        loop {
            deadline.check()?;
            let mut improved = false;
            for i in 0..n - 2 {
                for j in i + 2..n {
                    if Self::two_opt_valid(n, i, j) && self.two_opt_delta(t, i, j) < -IMPROVEMENT_EPS {
                        t[i + 1..=j].reverse();
                        improved = true;
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    if Self::relocate_valid(n, i, j) && self.relocate_delta(t, i, j) < -IMPROVEMENT_EPS {
                        apply_relocate(t, i, j);
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                return Ok(());
            }
        }
    }

    /// Applies the first improving move that removes an edge at `v` or relocates `v`.
    fn improve_at(&self, t: &mut Vec<usize>, v: usize) -> bool {
        let n = t.len();
        let pos = t.iter().position(|&x| x == v).expect("node on tour");
        for e in [(pos + n - 1) % n, pos] {
            for other in 0..n {
                let (i, j) = (e.min(other), e.max(other));
                if Self::two_opt_valid(n, i, j) && self.two_opt_delta(t, i, j) < -IMPROVEMENT_EPS {
                    t[i + 1..=j].reverse();
                    return true;
                }
            }
        }
        for j in 0..n {
            if Self::relocate_valid(n, pos, j) && self.relocate_delta(t, pos, j) < -IMPROVEMENT_EPS {
                apply_relocate(t, pos, j);
                return true;
            }
        }
        false
    }

    /// Tour edge with maximum utility; ties go to the smallest `(min, max)` node pair.
    fn max_utility_edge(&self, t: &[usize]) -> (usize, usize) {
        let n = t.len();
        let mut best: Option<((usize, usize), f64)> = None;
        for k in 0..n {
            let (a, b) = (t[k], t[(k + 1) % n]);
            let key = (a.min(b), a.max(b));
            let u = self.utility(a, b);
            let better = match best {
                None => true,
                Some((bk, bu)) => u > bu || (u == bu && key < bk),
            };
            if better {
                best = Some((key, u));
            }
        }
        best.expect("non-empty tour").0
    }

    fn perturb(&mut self, t: &mut Vec<usize>, moves_wanted: usize) {
        let mut moves = 0;
        let mut attempts = 0;
        while moves < moves_wanted && attempts < moves_wanted * ATTEMPTS_PER_MOVE {
            attempts += 1;
            let (a, b) = self.max_utility_edge(t);
            self.penalties.increment(a, b);
            for v in [a, b] {
                while moves < moves_wanted && self.improve_at(t, v) {
                    moves += 1;
                }
            }
        }
    }
}

/// Moves `t[i]` to sit between `t[j]` and `t[j+1]`.
fn apply_relocate(t: &mut Vec<usize>, i: usize, j: usize) {
    let after = t[j];
    let x = t.remove(i);
    let pos = t.iter().position(|&y| y == after).expect("anchor on tour");
    t.insert(pos + 1, x);
}

/// Runs GLS and returns the best tour under the true length plus the best-so-far
/// curve (one value per iteration).
pub fn gls_run(
    instance: &TspInstance,
    eta: &Matrix,
    params: &GlsParams,
    _seed: u64,
    deadline: Deadline,
) -> Result<RunOutcome, FrameworkError> {
    gls_run_observed(instance, eta, params, deadline, |_, _| {})
}

/// [`gls_run`] with a callback invoked after every iteration with the
/// penalty state and the current best length.
pub fn gls_run_observed(
    instance: &TspInstance,
    eta: &Matrix,
    params: &GlsParams,
    deadline: Deadline,
    mut observe: impl FnMut(&PenaltyState, f64),
) -> Result<RunOutcome, FrameworkError> {
    params.validate()?;
    let n = instance.len();
    if eta.rows() != n || eta.cols() != n {
        return Err(FrameworkError::invalid(format!("expected a {n}x{n} matrix, got {}x{}", eta.rows(), eta.cols())));
    }
    check_finite(eta.as_slice(), "knowledge matrix")?;
    let soft_stop = params.time_limit.and_then(|s| Instant::now().checked_add(Duration::from_secs_f64(s)));

    let mut search = Search {
        dist: &instance.dist,
        eta,
        penalties: PenaltyState::new(n),
        lambda: 0.0,
        general_utility: params.general_utility,
    };
    let mut tour = nearest_neighbor_tour(instance, 0);
    search.local_search(&mut tour, &deadline)?;
    let mut best = tour.clone();
    let mut best_len = instance.tour_length(&best);
    search.lambda = gls_lambda(params.lambda_alpha, best_len, n);
    let mut curve = Vec::with_capacity(params.n_iterations);
    if n >= 4 {
        for _ in 0..params.n_iterations {
            deadline.check()?;
            if soft_stop.is_some_and(|s| Instant::now() >= s) {
                break;
            }
            search.perturb(&mut tour, params.perturbation_moves);
            search.local_search(&mut tour, &deadline)?;
            let len = instance.tour_length(&tour);
            if len < best_len - IMPROVEMENT_EPS {
                best_len = len;
                best.clone_from(&tour);
                search.lambda = gls_lambda(params.lambda_alpha, best_len, n);
            }
            curve.push(best_len);
            observe(&search.penalties, best_len);
        }
    }
    if curve.is_empty() {
        curve.push(best_len);
    }
    Ok(RunOutcome { solution: Solution::new(Payload::Tour(best), best_len), curve })
}
