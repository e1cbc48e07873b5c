//! Dataset manifests: which instances make up the train and test sets of a
//! (framework, problem) pair, and how to materialize them.
//!
//! Seeds are assigned per manifest entry: the `e`-th entry (train entries
//! first, then test entries in listed order) covers seeds
//! `seed_base + SEED_STRIDE * e ..` for `count` consecutive values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::instance::Overrides;
use crate::io::{read_instance, write_instance};
use crate::parallel::{map_ordered, Execution};
use crate::{gen_instance, Framework, Instance, Problem, ProblemError};

pub const MANIFEST_FORMAT: &str = "pathwise-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SEED_STRIDE: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One (size, count, overrides) row before seeds are assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct EntrySpec {
    pub split: Split,
    pub n: usize,
    pub count: usize,
    pub overrides: Overrides,
}

impl EntrySpec {
    pub fn new(split: Split, n: usize, count: usize) -> Self {
        Self { split, n, count, overrides: Overrides::default() }
    }

    pub fn with_overrides(mut self, overrides: Overrides) -> Self {
        self.overrides = overrides;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub split: Split,
    pub n: usize,
    pub count: usize,
    /// Seeds `seed_start .. seed_start + count`.
    pub seed_start: u64,
    #[serde(default)]
    pub overrides: Overrides,
    /// Instance file paths relative to the manifest directory; empty when the
    /// manifest has not been materialized.
    #[serde(default)]
    pub files: Vec<String>,
}

impl DatasetEntry {
    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        self.seed_start..self.seed_start + self.count as u64
    }

    /// Short label such as `n=50` or `n=1000 online-capacity=500`.
    pub fn label(&self) -> String {
        let mut s = format!("n={}", self.n);
        if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(&self.overrides) {
            for (k, v) in map {
                s.push_str(&format!(" {k}={v}"));
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub framework: Framework,
    pub problem: Problem,
    pub seed_base: u64,
    pub entries: Vec<DatasetEntry>,
}

/// Default train and test rows for every benchmarked (framework, problem) pair.
pub fn default_entries(framework: Framework, problem: Problem) -> Result<Vec<EntrySpec>, ProblemError> {
    use Split::{Test, Train};
    let plain = |split, sizes: &[usize], count| -> Vec<EntrySpec> {
        sizes.iter().map(|&n| EntrySpec::new(split, n, count)).collect()
    };
    let rows = match (framework, problem) {
        (Framework::Constructive, Problem::Tsp) => {
            [plain(Train, &[50], 64), plain(Test, &[50, 100, 200], 250)].concat()
        }
        (Framework::Constructive, Problem::Kp) => {
            [plain(Train, &[100], 64), plain(Test, &[50, 100, 200, 500], 250)].concat()
        }
        (Framework::Constructive, Problem::BppOnline) => {
            let mut rows = plain(Train, &[1000, 5000], 4);
            for n in [1000, 5000, 10_000] {
                for cap in [100, 500] {
                    let o = Overrides { online_capacity: Some(cap), ..Default::default() };
                    rows.push(EntrySpec::new(Test, n, 10).with_overrides(o));
                }
            }
            rows
        }
        (Framework::Aco, Problem::Tsp) => [plain(Train, &[50], 5), plain(Test, &[50, 100], 250)].concat(),
        (Framework::Aco, Problem::Cvrp) => [plain(Train, &[50], 10), plain(Test, &[50, 100], 250)].concat(),
        (Framework::Aco, Problem::Mkp) => {
            [plain(Train, &[100], 5), plain(Test, &[100, 200, 300, 500, 1000], 100)].concat()
        }
        (Framework::Aco, Problem::Op) => [plain(Train, &[50], 10), plain(Test, &[50, 100, 200, 500], 100)].concat(),
        (Framework::Aco, Problem::BppOffline) => [plain(Train, &[500], 5), plain(Test, &[500, 1000], 100)].concat(),
        (Framework::Gls, Problem::Tsp) => {
            let mut rows = [plain(Train, &[200], 10), plain(Test, &[100, 200, 500, 1000], 250)].concat();
            for r in &mut rows {
                r.overrides = Overrides::gls();
            }
            rows
        }
        _ => return Err(ProblemError::UnsupportedPair { framework, problem }),
    };
    Ok(rows)
}

impl Manifest {
    /// Assigns seeds to `specs`; train rows are placed before test rows.
    pub fn new(
        framework: Framework,
        problem: Problem,
        seed_base: u64,
        specs: &[EntrySpec],
    ) -> Result<Self, ProblemError> {
        let ordered =
            specs.iter().filter(|s| s.split == Split::Train).chain(specs.iter().filter(|s| s.split == Split::Test));
        let mut entries = Vec::with_capacity(specs.len());
        for (e, spec) in ordered.enumerate() {
            spec.overrides.validate_for(problem)?;
            if spec.count as u64 > SEED_STRIDE {
                return Err(ProblemError::InvalidParams(format!(
                    "at most {SEED_STRIDE} instances per entry, got {}",
                    spec.count
                )));
            }
            let seed_start = (e as u64)
                .checked_mul(SEED_STRIDE)
                .and_then(|o| o.checked_add(seed_base))
                .ok_or_else(|| ProblemError::InvalidParams("seed range overflows u64".into()))?;
            entries.push(DatasetEntry {
                split: spec.split,
                n: spec.n,
                count: spec.count,
                seed_start,
                overrides: spec.overrides.clone(),
                files: Vec::new(),
            });
        }
        Ok(Self { format: MANIFEST_FORMAT.to_string(), framework, problem, seed_base, entries })
    }

    pub fn with_defaults(framework: Framework, problem: Problem, seed_base: u64) -> Result<Self, ProblemError> {
        Self::new(framework, problem, seed_base, &default_entries(framework, problem)?)
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Generates the instances of one entry in memory.
    pub fn generate(&self, entry: &DatasetEntry, exec: Execution) -> Result<Vec<Instance>, ProblemError> {
        let seeds: Vec<u64> = entry.seeds().collect();
        map_ordered(&seeds, exec, |&seed| gen_instance(self.problem, entry.n, seed, &entry.overrides))
            .into_iter()
            .collect()
    }

    /// Writes every instance plus `manifest.json` into `dir`, which must exist.
    pub fn materialize(&mut self, dir: &Path, exec: Execution) -> Result<PathBuf, ProblemError> {
        for i in 0..self.entries.len() {
            let entry = self.entries[i].clone();
            let sub = dir.join(entry.split.name());
            fs::create_dir_all(&sub).map_err(|e| ProblemError::io(&sub, e))?;
            let instances = self.generate(&entry, exec)?;
            let mut files = Vec::with_capacity(instances.len());
            for inst in &instances {
                let rel = format!("{}/{}.json", entry.split.name(), inst.id());
                write_instance(&dir.join(&rel), inst)?;
                files.push(rel);
            }
            self.entries[i].files = files;
        }
        let path = dir.join(MANIFEST_FILE);
        self.save(&path)?;
        Ok(path)
    }

    pub fn save(&self, path: &Path) -> Result<(), ProblemError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialization cannot fail");
        fs::write(path, text + "\n").map_err(|e| ProblemError::io(path, e))
    }

    /// Reads a manifest file (or the `manifest.json` inside a directory).
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ProblemError> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = fs::read_to_string(&file).map_err(|e| ProblemError::io(&file, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| ProblemError::format(&file, e))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(ProblemError::format(&file, format!("unsupported format `{}`", manifest.format)));
        }
        let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, dir))
    }

    /// Loads the instances of one entry from disk, or generates them when the
    /// manifest lists no files. Loaded instances are checked against the entry.
    pub fn instances(&self, dir: &Path, entry: &DatasetEntry, exec: Execution) -> Result<Vec<Instance>, ProblemError> {
        if entry.files.is_empty() {
            return self.generate(entry, exec);
        }
        if entry.files.len() != entry.count {
            return Err(ProblemError::format(
                dir,
                format!("entry {} lists {} files", entry.label(), entry.files.len()),
            ));
        }
        let loaded: Result<Vec<Instance>, ProblemError> =
            map_ordered(&entry.files, exec, |f| read_instance(&dir.join(f))).into_iter().collect();
        let loaded = loaded?;
        for (inst, seed) in loaded.iter().zip(entry.seeds()) {
            if inst.problem() != self.problem || inst.n != entry.n || inst.seed != seed {
                return Err(ProblemError::format(
                    dir,
                    format!("instance {} does not match its manifest entry", inst.id()),
                ));
            }
        }
        Ok(loaded)
    }
}
