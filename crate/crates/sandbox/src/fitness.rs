use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Fitness P(h; D): mean negated cost, higher is better. The failure
/// sentinel orders below every finite value and serializes as `null`.
#[derive(Debug, Clone, Copy)]
pub struct Fitness(f64);

impl Fitness {
    pub const SENTINEL: Fitness = Fitness(f64::NEG_INFINITY);

    /// Finite values become fitnesses; anything else is the sentinel.
    pub fn new(value: f64) -> Self {
        if value.is_finite() {
            Self(value)
        } else {
            Self::SENTINEL
        }
    }

    pub fn is_sentinel(self) -> bool {
        !self.0.is_finite()
    }

    pub fn value(self) -> Option<f64> {
        (!self.is_sentinel()).then_some(self.0)
    }

    /// Numeric value for averaging: the sentinel maps to the most negative finite f64.
    pub fn stand_in(self) -> f64 {
        self.value().unwrap_or(f64::MIN)
    }
}

impl PartialEq for Fitness {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Fitness {}

impl PartialOrd for Fitness {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fitness {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.value(), other.value()) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            (Some(_), None) => Ordering::Greater,
            (None, Some(_)) => Ordering::Less,
            (None, None) => Ordering::Equal,
        }
    }
}

impl fmt::Display for Fitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("failed"),
        }
    }
}

impl Serialize for Fitness {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Fitness {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.map_or(Self::SENTINEL, Self::new))
    }
}

/// Outcome class of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStatus {
    Ok,
    ParseError,
    RuntimeError,
    Timeout,
    InvalidOutput,
}

impl fmt::Display for EvalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalStatus::Ok => "ok",
            EvalStatus::ParseError => "parse_error",
            EvalStatus::RuntimeError => "runtime_error",
            EvalStatus::Timeout => "timeout",
            EvalStatus::InvalidOutput => "invalid_output",
        })
    }
}

/// Result of evaluating one program on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub fitness: Fitness,
    /// Native objective per instance (empty unless every instance succeeded).
    pub objectives: Vec<f64>,
    pub status: EvalStatus,
    pub message: Option<String>,
    pub wall_seconds: f64,
}

impl FitnessReport {
    pub fn failure(status: EvalStatus, message: impl Into<String>, wall_seconds: f64) -> Self {
        Self { fitness: Fitness::SENTINEL, objectives: Vec::new(), status, message: Some(message.into()), wall_seconds }
    }

    pub fn is_ok(&self) -> bool {
        self.status == EvalStatus::Ok
    }

    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.status == other.status
            && self.message == other.message
            && self.fitness.value().map(f64::to_bits) == other.fitness.value().map(f64::to_bits)
            && self.objectives.len() == other.objectives.len()
            && self.objectives.iter().zip(&other.objectives).all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// One JSON record.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("fitness reports always serialize")
    }
}
