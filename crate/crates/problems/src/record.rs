//! One JSON line per framework run.

use serde::{Deserialize, Serialize};

use crate::{Framework, Problem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub framework: Framework,
    pub problem: Problem,
    pub n: usize,
    pub seed: u64,
    pub method: String,
    pub params: serde_json::Value,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curve: Vec<f64>,
}

impl RunRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization cannot fail")
    }
}
