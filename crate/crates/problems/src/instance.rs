//! Seeded benchmark instance generation.
//!
//! Every instance draws from its own `ChaCha8Rng` seeded with the instance
//! seed through `SeedableRng::seed_from_u64`. Draw order is part of the
//! format and must not change:
//!
//! * TSP: coordinates row-major (`x0, y0, x1, y1, ...`).
//! * KP: values, then weights.
//! * CVRP: customer coordinates row-major, then customer demands. The depot
//!   is fixed and consumes no draws.
//! * MKP: values, then weights row-major (`w[0][0..m], w[1][0..m], ...`),
//!   then one capacity draw per knapsack.
//! * OP: coordinates row-major (node 0 is the depot). Prizes are derived.
//! * BPP: item sizes in arrival order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Weibull};
use serde::{Deserialize, Serialize};

use crate::matrix::{euclid, euclidean_distances, Matrix};
use crate::{Problem, ProblemError};

/// Diagonal value of every distance matrix.
pub const DIAGONAL: f64 = 1.0;
/// Extra diagonal constant used when an instance is prepared for GLS.
pub const GLS_DIAGONAL_EPSILON: f64 = 1e-5;

pub const CVRP_CAPACITY: f64 = 50.0;
pub const CVRP_DEPOT: [f64; 2] = [0.5, 0.5];
pub const MKP_DEFAULT_KNAPSACKS: usize = 5;
pub const BPP_OFFLINE_CAPACITY: u32 = 150;
pub const BPP_ONLINE_CAPACITY: u32 = 100;
pub const BPP_ONLINE_CLIP: f64 = 100.0;
const WEIBULL_SHAPE: f64 = 3.0;
const WEIBULL_SCALE: f64 = 45.0;

/// The portable generator every instance is drawn from.
pub fn instance_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-problem generator parameters that may be overridden.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gls_mode: Option<bool>,
    #[serde(default, rename = "online-capacity", skip_serializing_if = "Option::is_none")]
    pub online_capacity: Option<u32>,
}

impl Overrides {
    pub const KEYS: [&'static str; 5] = ["capacity", "m", "budget", "gls_mode", "online-capacity"];

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn gls() -> Self {
        Self { gls_mode: Some(true), ..Self::default() }
    }

    /// Parses `key=value` pairs.
    pub fn parse<'a>(pairs: impl IntoIterator<Item = &'a str>) -> Result<Self, ProblemError> {
        let mut out = Self::default();
        for pair in pairs {
            let (key, value) =
                pair.split_once('=').ok_or_else(|| ProblemError::InvalidOverrideValue(pair.to_string()))?;
            let bad = || ProblemError::InvalidOverrideValue(pair.to_string());
            match key.trim() {
                "capacity" => out.capacity = Some(value.trim().parse().map_err(|_| bad())?),
                "m" => out.m = Some(value.trim().parse().map_err(|_| bad())?),
                "budget" => out.budget = Some(value.trim().parse().map_err(|_| bad())?),
                "gls_mode" => out.gls_mode = Some(value.trim().parse().map_err(|_| bad())?),
                "online-capacity" => out.online_capacity = Some(value.trim().parse().map_err(|_| bad())?),
                other => return Err(ProblemError::UnknownOverrideKey(other.to_string())),
            }
        }
        Ok(out)
    }

    fn present_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        if self.capacity.is_some() {
            keys.push("capacity");
        }
        if self.m.is_some() {
            keys.push("m");
        }
        if self.budget.is_some() {
            keys.push("budget");
        }
        if self.gls_mode.is_some() {
            keys.push("gls_mode");
        }
        if self.online_capacity.is_some() {
            keys.push("online-capacity");
        }
        keys
    }

    /// Rejects keys that the problem does not define.
    pub fn validate_for(&self, problem: Problem) -> Result<(), ProblemError> {
        let allowed: &[&str] = match problem {
            Problem::Tsp => &["gls_mode"],
            Problem::Kp | Problem::Cvrp | Problem::BppOffline => &["capacity"],
            Problem::Mkp => &["m"],
            Problem::Op => &["budget"],
            Problem::BppOnline => &["online-capacity"],
        };
        if let Some(key) = self.present_keys().into_iter().find(|k| !allowed.contains(k)) {
            return Err(ProblemError::InvalidOverride { problem, key: key.to_string() });
        }
        let positive = |v: f64, key: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ProblemError::InvalidOverrideValue(format!("{key}={v}")))
            }
        };
        if let Some(c) = self.capacity {
            positive(c, "capacity")?;
        }
        if let Some(b) = self.budget {
            positive(b, "budget")?;
        }
        if self.m == Some(0) {
            return Err(ProblemError::InvalidOverrideValue("m=0".into()));
        }
        if let Some(c) = self.online_capacity {
            if f64::from(c) < BPP_ONLINE_CLIP {
                return Err(ProblemError::InvalidOverrideValue(format!("online-capacity={c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    pub coords: Vec<[f64; 2]>,
    pub dist: Matrix,
    pub gls_mode: bool,
}

impl TspInstance {
    pub fn from_coords(coords: Vec<[f64; 2]>, gls_mode: bool) -> Self {
        let diagonal = if gls_mode { DIAGONAL + GLS_DIAGONAL_EPSILON } else { DIAGONAL };
        let dist = euclidean_distances(&coords, diagonal);
        Self { coords, dist, gls_mode }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn tour_length(&self, tour: &[usize]) -> f64 {
        closed_length(&self.dist, tour)
    }
}

/// Length of a closed tour over `dist`.
pub fn closed_length(dist: &Matrix, tour: &[usize]) -> f64 {
    if tour.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for k in 0..tour.len() {
        total += dist.get(tour[k], tour[(k + 1) % tour.len()]);
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpInstance {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvrpInstance {
    /// Index 0 is the depot.
    pub coords: Vec<[f64; 2]>,
    /// Demand per node; the depot has demand 0.
    pub demands: Vec<u32>,
    pub capacity: f64,
    pub dist: Matrix,
}

impl CvrpInstance {
    pub fn new(coords: Vec<[f64; 2]>, demands: Vec<u32>, capacity: f64) -> Self {
        let dist = euclidean_distances(&coords, DIAGONAL);
        Self { coords, demands, capacity, dist }
    }

    pub fn customers(&self) -> usize {
        self.coords.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MkpInstance {
    pub values: Vec<f64>,
    /// `n x m`, already normalized by the knapsack capacities.
    pub weights: Matrix,
    pub capacities: Vec<f64>,
}

impl MkpInstance {
    pub fn knapsacks(&self) -> usize {
        self.weights.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpInstance {
    /// Index 0 is the depot.
    pub coords: Vec<[f64; 2]>,
    pub prizes: Vec<f64>,
    pub dist: Matrix,
    pub budget: f64,
}

impl OpInstance {
    pub fn new(coords: Vec<[f64; 2]>, prizes: Vec<f64>, budget: f64) -> Self {
        let dist = euclidean_distances(&coords, DIAGONAL);
        Self { coords, prizes, dist, budget }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BppMode {
    Offline,
    /// Items must be placed in the stored arrival order.
    Online,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BppInstance {
    pub sizes: Vec<u32>,
    pub capacity: u32,
    pub mode: BppMode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceData {
    Tsp(TspInstance),
    Kp(KpInstance),
    Cvrp(CvrpInstance),
    Mkp(MkpInstance),
    Op(OpInstance),
    Bpp(BppInstance),
}

/// A generated instance together with the parameters that reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub n: usize,
    pub seed: u64,
    pub overrides: Overrides,
    pub data: InstanceData,
}

impl Instance {
    pub fn problem(&self) -> Problem {
        match &self.data {
            InstanceData::Tsp(_) => Problem::Tsp,
            InstanceData::Kp(_) => Problem::Kp,
            InstanceData::Cvrp(_) => Problem::Cvrp,
            InstanceData::Mkp(_) => Problem::Mkp,
            InstanceData::Op(_) => Problem::Op,
            InstanceData::Bpp(b) => match b.mode {
                BppMode::Offline => Problem::BppOffline,
                BppMode::Online => Problem::BppOnline,
            },
        }
    }

    /// Short identifier used in reports, e.g. `tsp-50-7`.
    pub fn id(&self) -> String {
        format!("{}-{}-{}", self.problem(), self.n, self.seed)
    }
}

/// Default OP travel budget for a node count, if the published schedule covers it.
pub fn op_budget_for(n: usize) -> Option<f64> {
    match n {
        50 => Some(3.0),
        100 => Some(4.0),
        200 => Some(5.0),
        300 => Some(6.0),
        n if n > 300 => Some(7.0),
        _ => None,
    }
}

/// Default KP capacity: 12.5 for the 50-item instances, 25 otherwise.
pub fn kp_capacity_for(n: usize) -> f64 {
    if n == 50 {
        12.5
    } else {
        25.0
    }
}

/// Generates one instance. Identical arguments always give a bit-identical result.
pub fn gen_instance(problem: Problem, n: usize, seed: u64, overrides: &Overrides) -> Result<Instance, ProblemError> {
    overrides.validate_for(problem)?;
    let min = problem.min_size();
    if n < min {
        return Err(ProblemError::SizeTooSmall { problem, n, min });
    }
    let mut rng = instance_rng(seed);
    let data = match problem {
        Problem::Tsp => {
            let coords = sample_points(&mut rng, n);
            InstanceData::Tsp(TspInstance::from_coords(coords, overrides.gls_mode.unwrap_or(false)))
        }
        Problem::Kp => {
            let values = sample_unit(&mut rng, n);
            let weights = sample_unit(&mut rng, n);
            let capacity = overrides.capacity.unwrap_or_else(|| kp_capacity_for(n));
            InstanceData::Kp(KpInstance { values, weights, capacity })
        }
        Problem::Cvrp => {
            let mut coords = vec![CVRP_DEPOT];
            coords.extend(sample_points(&mut rng, n));
            let mut demands = vec![0];
            demands.extend((0..n).map(|_| rng.gen_range(1..=9u32)));
            let capacity = overrides.capacity.unwrap_or(CVRP_CAPACITY);
            InstanceData::Cvrp(CvrpInstance::new(coords, demands, capacity))
        }
        Problem::Mkp => {
            let m = overrides.m.unwrap_or(MKP_DEFAULT_KNAPSACKS);
            InstanceData::Mkp(gen_mkp(&mut rng, n, m))
        }
        Problem::Op => {
            let budget = match overrides.budget {
                Some(b) => b,
                None => op_budget_for(n).ok_or(ProblemError::MissingBudget { n })?,
            };
            let coords = sample_points(&mut rng, n);
            let prizes = op_prizes(&coords);
            InstanceData::Op(OpInstance::new(coords, prizes, budget))
        }
        Problem::BppOffline => {
            let capacity = match overrides.capacity {
                Some(c) if c.fract() != 0.0 => return Err(ProblemError::InvalidOverrideValue(format!("capacity={c}"))),
                Some(c) => c as u32,
                None => BPP_OFFLINE_CAPACITY,
            };
            let sizes = (0..n).map(|_| rng.gen_range(20..=100u32)).collect();
            InstanceData::Bpp(BppInstance { sizes, capacity, mode: BppMode::Offline })
        }
        Problem::BppOnline => {
            let capacity = overrides.online_capacity.unwrap_or(BPP_ONLINE_CAPACITY);
            let weibull = Weibull::new(WEIBULL_SCALE, WEIBULL_SHAPE).expect("valid weibull");
            let sizes = (0..n)
                .map(|_| {
                    let x: f64 = weibull.sample(&mut rng);
                    x.clamp(1.0, BPP_ONLINE_CLIP).round() as u32
                })
                .collect();
            InstanceData::Bpp(BppInstance { sizes, capacity, mode: BppMode::Online })
        }
    };
    Ok(Instance { n, seed, overrides: overrides.clone(), data })
}

fn sample_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

fn sample_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            let x = rng.gen::<f64>();
            let y = rng.gen::<f64>();
            [x, y]
        })
        .collect()
}

fn gen_mkp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> MkpInstance {
    let values = sample_unit(rng, n);
    let raw = Matrix::from_vec(n, m, sample_unit(rng, n * m)).expect("shape");
    let mut capacities = Vec::with_capacity(m);
    for j in 0..m {
        let (mut max, mut sum) = (0.0f64, 0.0);
        for i in 0..n {
            max = max.max(raw.get(i, j));
            sum += raw.get(i, j);
        }
        let u: f64 = rng.gen();
        capacities.push(max + u * (sum - max));
    }
    let weights = Matrix::from_fn(n, m, |i, j| raw.get(i, j) / capacities[j]);
    MkpInstance { values, weights, capacities: vec![1.0; m] }
}

/// Distance-to-depot prizes on the `{0.01, ..., 1.00}` lattice, then scaled so the
/// largest prize is exactly 1.
pub fn op_prizes(coords: &[[f64; 2]]) -> Vec<f64> {
    let depot = coords[0];
    let d: Vec<f64> = coords.iter().map(|&c| euclid(c, depot)).collect();
    let d_max = d.iter().copied().fold(0.0, f64::max);
    let lattice: Vec<f64> = d
        .iter()
        .map(|&di| {
            let ratio = if d_max > 0.0 { di / d_max } else { 0.0 };
            (1.0 + (99.0 * ratio).floor()) / 100.0
        })
        .collect();
    let r_max = lattice.iter().copied().fold(0.0, f64::max);
    lattice.iter().map(|&r| r / r_max).collect()
}

/// `ceil(sum(sizes) / capacity)` in exact integer arithmetic.
pub fn bpp_lower_bound(instance: &BppInstance) -> Result<u64, ProblemError> {
    if let Some((item, &size)) = instance.sizes.iter().enumerate().find(|(_, &s)| s > instance.capacity) {
        return Err(ProblemError::ItemExceedsCapacity { item, size, capacity: instance.capacity });
    }
    if instance.capacity == 0 {
        return Err(ProblemError::InvalidOverrideValue("capacity=0".into()));
    }
    let total: u64 = instance.sizes.iter().map(|&s| u64::from(s)).sum();
    Ok(total.div_ceil(u64::from(instance.capacity)))
}
