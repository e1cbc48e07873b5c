//! Row tables, reference gaps and best-so-far curve aggregation.

use std::collections::BTreeMap;

use pathwise_problems::Problem;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const ROW_HEADER: &str = "method\ttest_set\tmean_objective\treference\tgap_percent\tinstances\truns";

/// One method on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub test_set: String,
    pub mean_objective: f64,
    /// Method whose mean objective the gap is measured against.
    pub reference: Option<String>,
    /// Percent gap to the reference; positive means worse.
    pub gap_percent: Option<f64>,
    pub instances: usize,
    pub runs: usize,
}

impl ReportRow {
    pub fn new(method: impl Into<String>, test_set: impl Into<String>, objectives: &[f64]) -> Self {
        Self {
            method: method.into(),
            test_set: test_set.into(),
            mean_objective: objectives.iter().sum::<f64>() / objectives.len().max(1) as f64,
            reference: None,
            gap_percent: None,
            instances: objectives.len(),
            runs: 1,
        }
    }

    pub fn to_tsv(&self) -> String {
        let opt = |v: Option<f64>| {
            v.map(|x| match format!("{x:.4}") {
                s if s == "-0.0000" => "0.0000".to_string(),
                s => s,
            })
            .unwrap_or_default()
        };
        format!(
            "{}\t{}\t{:.6}\t{}\t{}\t{}\t{}",
            self.method,
            self.test_set,
            self.mean_objective,
            self.reference.as_deref().unwrap_or(""),
            opt(self.gap_percent),
            self.instances,
            self.runs
        )
    }
}

pub fn rows_to_tsv(rows: &[ReportRow]) -> String {
    let mut out = format!("{ROW_HEADER}\n");
    for r in rows {
        out.push_str(&r.to_tsv());
        out.push('\n');
    }
    out
}

pub fn rows_from_tsv(text: &str) -> Result<Vec<ReportRow>, CliError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(ROW_HEADER) {
        return Err(CliError::Invalid("row table does not start with the expected header".into()));
    }
    let bad = |line: &str| CliError::Invalid(format!("malformed row `{line}`"));
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 7 {
                return Err(bad(line));
            }
            let opt_str = |s: &str| (!s.is_empty()).then(|| s.to_string());
            let gap = if f[4].is_empty() { None } else { Some(f[4].parse().map_err(|_| bad(line))?) };
            Ok(ReportRow {
                method: f[0].to_string(),
                test_set: f[1].to_string(),
                mean_objective: f[2].parse().map_err(|_| bad(line))?,
                reference: opt_str(f[3]),
                gap_percent: gap,
                instances: f[5].parse().map_err(|_| bad(line))?,
                runs: f[6].parse().map_err(|_| bad(line))?,
            })
        })
        .collect()
}

/// Percent gap of `mean` to `reference`, positive when `mean` is worse.
pub fn gap_percent(problem: Option<Problem>, mean: f64, reference: f64) -> f64 {
    let worse_by = if problem.is_some_and(Problem::is_maximization) { reference - mean } else { mean - reference };
    100.0 * worse_by / reference.abs()
}

/// Fills gaps against `method`'s rows; rows whose test set has no reference row keep no gap.
pub fn apply_reference(rows: &mut [ReportRow], reference: &[ReportRow], method: &str, problem: Option<Problem>) {
    let refs: BTreeMap<&str, f64> =
        reference.iter().filter(|r| r.method == method).map(|r| (r.test_set.as_str(), r.mean_objective)).collect();
    for row in rows.iter_mut() {
        match refs.get(row.test_set.as_str()) {
            Some(&value) if value != 0.0 => {
                row.reference = Some(method.to_string());
                row.gap_percent = Some(gap_percent(problem, row.mean_objective, value));
            }
            _ => {
                row.reference = None;
                row.gap_percent = None;
            }
        }
    }
}

/// Merges rows of several runs: mean of the per-run means per (method, test set).
/// Gaps are dropped; apply a reference afterwards.
pub fn merge_rows(tables: &[Vec<ReportRow>]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(String, String), Vec<&ReportRow>> = BTreeMap::new();
    let mut order: Vec<(String, String)> = Vec::new();
    for row in tables.iter().flatten() {
        let key = (row.method.clone(), row.test_set.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(row);
    }
    order
        .into_iter()
        .map(|key| {
            let members = &groups[&key];
            let runs: usize = members.iter().map(|r| r.runs).sum();
            let weighted: f64 = members.iter().map(|r| r.mean_objective * r.runs as f64).sum();
            ReportRow {
                method: key.0,
                test_set: key.1,
                mean_objective: weighted / runs as f64,
                reference: None,
                gap_percent: None,
                instances: members.iter().map(|r| r.instances).max().unwrap_or(0),
                runs,
            }
        })
        .collect()
}

/// Best-so-far curve of one run: (evaluation number, best fitness) pairs.
pub type Curve = Vec<(usize, f64)>;

pub fn curve_from_csv(text: &str) -> Result<Curve, CliError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some("evaluations,best_fitness") {
        return Err(CliError::Invalid("curve file does not start with `evaluations,best_fitness`".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let bad = || CliError::Invalid(format!("malformed curve line `{line}`"));
            let (e, v) = line.split_once(',').ok_or_else(bad)?;
            Ok((e.trim().parse().map_err(|_| bad())?, v.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

/// Pointwise statistics of several curves at one evaluation number.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSample {
    pub evaluations: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub runs: usize,
}

/// Aligns curves on every evaluation number any of them reports. A run
/// contributes its last value at or before that number; after its final
/// point it keeps its final value, and before its first point it is absent.
pub fn aggregate_curves(curves: &[Curve]) -> Vec<CurveSample> {
    let mut grid: Vec<usize> = curves.iter().flatten().map(|p| p.0).collect();
    grid.sort_unstable();
    grid.dedup();
    grid.into_iter()
        .map(|ell| {
            let values: Vec<f64> =
                curves.iter().filter_map(|c| c.iter().take_while(|p| p.0 <= ell).last().map(|p| p.1)).collect();
            CurveSample {
                evaluations: ell,
                mean: values.iter().sum::<f64>() / values.len() as f64,
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                runs: values.len(),
            }
        })
        .collect()
}

pub fn curve_samples_csv(samples: &[CurveSample]) -> String {
    let mut out = String::from("evaluations,mean,min,max,runs\n");
    for s in samples {
        out.push_str(&format!("{},{},{},{},{}\n", s.evaluations, s.mean, s.min, s.max, s.runs));
    }
    out
}
