//! Instance files: one JSON document per instance with a header (`format`,
//! `problem`, `n`, `seed`, `overrides`) followed by the numeric payload.
//! Distance matrices are not stored; they are rebuilt from coordinates on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::instance::{
    BppInstance, BppMode, CvrpInstance, Instance, InstanceData, KpInstance, MkpInstance, OpInstance, Overrides,
    TspInstance,
};
use crate::matrix::Matrix;
use crate::{Problem, ProblemError};

pub const INSTANCE_FORMAT: &str = "pathwise-instance/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    format: String,
    problem: Problem,
    n: usize,
    seed: u64,
    #[serde(default)]
    overrides: Overrides,
    payload: FilePayload,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum FilePayload {
    Tsp { coords: Vec<[f64; 2]>, gls_mode: bool },
    Kp { values: Vec<f64>, weights: Vec<f64>, capacity: f64 },
    Cvrp { coords: Vec<[f64; 2]>, demands: Vec<u32>, capacity: f64 },
    Mkp { values: Vec<f64>, weights: Vec<Vec<f64>>, capacities: Vec<f64> },
    Op { coords: Vec<[f64; 2]>, prizes: Vec<f64>, budget: f64 },
    Bpp { sizes: Vec<u32>, capacity: u32, mode: BppMode },
}

/// Serializes an instance to its JSON text form.
pub fn instance_to_string(instance: &Instance) -> String {
    let payload = match &instance.data {
        InstanceData::Tsp(t) => FilePayload::Tsp { coords: t.coords.clone(), gls_mode: t.gls_mode },
        InstanceData::Kp(k) => {
            FilePayload::Kp { values: k.values.clone(), weights: k.weights.clone(), capacity: k.capacity }
        }
        InstanceData::Cvrp(c) => {
            FilePayload::Cvrp { coords: c.coords.clone(), demands: c.demands.clone(), capacity: c.capacity }
        }
        InstanceData::Mkp(m) => FilePayload::Mkp {
            values: m.values.clone(),
            weights: m.weights.to_rows(),
            capacities: m.capacities.clone(),
        },
        InstanceData::Op(o) => FilePayload::Op { coords: o.coords.clone(), prizes: o.prizes.clone(), budget: o.budget },
        InstanceData::Bpp(b) => FilePayload::Bpp { sizes: b.sizes.clone(), capacity: b.capacity, mode: b.mode },
    };
    let file = InstanceFile {
        format: INSTANCE_FORMAT.to_string(),
        problem: instance.problem(),
        n: instance.n,
        seed: instance.seed,
        overrides: instance.overrides.clone(),
        payload,
    };
    serde_json::to_string(&file).expect("instance serialization cannot fail")
}

/// Parses the JSON text form. `origin` is only used in error messages.
pub fn instance_from_str(text: &str, origin: &Path) -> Result<Instance, ProblemError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| ProblemError::format(origin, e))?;
    if file.format != INSTANCE_FORMAT {
        return Err(ProblemError::format(origin, format!("unsupported format `{}`", file.format)));
    }
    let bad = |reason: &str| ProblemError::format(origin, reason);
    let data = match file.payload {
        FilePayload::Tsp { coords, gls_mode } => InstanceData::Tsp(TspInstance::from_coords(coords, gls_mode)),
        FilePayload::Kp { values, weights, capacity } => {
            if values.len() != weights.len() {
                return Err(bad("values and weights differ in length"));
            }
            InstanceData::Kp(KpInstance { values, weights, capacity })
        }
        FilePayload::Cvrp { coords, demands, capacity } => {
            if coords.len() != demands.len() {
                return Err(bad("coords and demands differ in length"));
            }
            InstanceData::Cvrp(CvrpInstance::new(coords, demands, capacity))
        }
        FilePayload::Mkp { values, weights, capacities } => {
            let weights = Matrix::from_rows(&weights).ok_or_else(|| bad("ragged weight matrix"))?;
            if weights.rows() != values.len() || weights.cols() != capacities.len() {
                return Err(bad("weight matrix shape disagrees with values and capacities"));
            }
            InstanceData::Mkp(MkpInstance { values, weights, capacities })
        }
        FilePayload::Op { coords, prizes, budget } => {
            if coords.len() != prizes.len() {
                return Err(bad("coords and prizes differ in length"));
            }
            InstanceData::Op(OpInstance::new(coords, prizes, budget))
        }
        FilePayload::Bpp { sizes, capacity, mode } => InstanceData::Bpp(BppInstance { sizes, capacity, mode }),
    };
    let instance = Instance { n: file.n, seed: file.seed, overrides: file.overrides, data };
    if instance.problem() != file.problem {
        return Err(bad("payload does not match the declared problem"));
    }
    Ok(instance)
}

pub fn write_instance(path: &Path, instance: &Instance) -> Result<(), ProblemError> {
    fs::write(path, instance_to_string(instance) + "\n").map_err(|e| ProblemError::io(path, e))
}

pub fn read_instance(path: &Path) -> Result<Instance, ProblemError> {
    let text = fs::read_to_string(path).map_err(|e| ProblemError::io(path, e))?;
    instance_from_str(&text, path)
}
