use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use log::info;
use pathwise::orchestrator::{run_config, BackendKind, ConfigError, RunConfig, Summary};
use pathwise_problems::dataset::{EntrySpec, Manifest, Split};
use pathwise_problems::frameworks::{baseline_best_fit, baseline_first_fit};
use pathwise_problems::frameworks::{
    framework_defaults, run_framework, ClassicKnowledge, Deadline, FrameworkParams, NearestNeighbor, ValueDensity,
};
use pathwise_problems::parallel::{map_ordered, Execution};
use pathwise_problems::{bpp_lower_bound, Framework, Instance, InstanceData, Overrides, Problem};
use pathwise_sandbox::{evaluate, sandbox_check, EvalConfig, HeuristicProgram};
use serde::Serialize;

use crate::report::*;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "pathwise", version, about = "Heuristic evolution over entailment graphs, with benchmark tooling")]
pub struct Cli {
    /// Worker threads for per-instance fan-out and concurrent model calls (0 = all cores, 1 = sequential).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Log more (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset manifest and its instance files.
    GenData(GenData),
    /// Run a classical baseline over a manifest split.
    Baseline(Baseline),
    /// Score a saved heuristic on a manifest split.
    Evaluate(Evaluate),
    /// Run one evolution from a TOML configuration.
    Evolve(Evolve),
    /// Merge row tables and best-so-far curves from several output directories.
    Report(Report),
}

#[derive(Debug, Args)]
pub struct GenData {
    #[arg(long)]
    pub framework: Framework,
    #[arg(long)]
    pub problem: Problem,
    /// Entry `split:n:count[:key=value,...]`, repeatable (keys: capacity, m, budget, gls_mode, online-capacity).
    /// Without any, the benchmark entries for the pair are used.
    #[arg(long = "entry", value_name = "SPEC")]
    pub entries: Vec<String>,
    /// Replace every entry's instance count; entries left with 0 instances are dropped.
    #[arg(long)]
    pub count: Option<usize>,
    /// Seed offset; entry e uses seeds seed_base + 100000 * e onwards.
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ManifestArgs {
    /// Manifest file or directory (default: the benchmark manifest, generated in memory).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Manifest split to score.
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: Split,
    /// Framework hyperparameters as TOML, e.g. `framework = "aco"` plus any field to override.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    /// Row table (rows.tsv) holding the reference method; defaults to the rows being reported.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Method whose mean objective serves as the gap reference.
    #[arg(long)]
    pub reference_method: Option<String>,
}

#[derive(Debug, Args)]
pub struct Baseline {
    #[arg(long)]
    pub framework: Framework,
    #[arg(long)]
    pub problem: Problem,
    #[command(flatten)]
    pub data: ManifestArgs,
    #[command(flatten)]
    pub reference: ReferenceArgs,
    /// Directory for rows.tsv, records.jsonl and summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    /// Heuristic file; its `// pathwise-heuristic: framework/problem` header names the pair.
    pub heuristic: PathBuf,
    /// Pair for files without a header; must agree with the header when both are present.
    #[arg(long)]
    pub framework: Option<Framework>,
    #[arg(long)]
    pub problem: Option<Problem>,
    /// Method name in the row table (default: file stem).
    #[arg(long)]
    pub name: Option<String>,
    /// Seconds allowed per instance.
    #[arg(long, default_value_t = 10.0)]
    pub instance_time_limit: f64,
    #[command(flatten)]
    pub data: ManifestArgs,
    #[command(flatten)]
    pub reference: ReferenceArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct Evolve {
    /// Run configuration (TOML).
    pub config: PathBuf,
    /// Artifact directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
    /// Override the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the evaluation budget n_e.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Override the backend kind (mock, mock-demo, http).
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<BackendKind>,
}

#[derive(Debug, Args)]
pub struct Report {
    /// Output directories of evolve, baseline or evaluate.
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
    #[command(flatten)]
    pub reference: ReferenceArgs,
    /// Directory for the merged rows.tsv, curve_mean.csv, runs.tsv and report.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let exec = Execution::from_jobs(cli.jobs.unwrap_or(0));
    match cli.command {
        Command::GenData(a) => gen_data(a, exec),
        Command::Baseline(a) => baseline(a, exec),
        Command::Evaluate(a) => evaluate_cmd(a, exec),
        Command::Evolve(a) => evolve(a, cli.jobs),
        Command::Report(a) => report(a),
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        other => Err(format!("unknown split `{other}` (train or test)")),
    }
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown backend `{s}` (mock, mock-demo or http)"))
}

fn check_out_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    if !dir.exists() {
        return Ok(());
    }
    if !dir.is_dir() {
        return Err(invalid(format!("{} exists and is not a directory", dir.display())));
    }
    let mut listing = fs::read_dir(dir).map_err(|e| invalid(format!("{}: {e}", dir.display())))?;
    if listing.next().is_some() && !force {
        return Err(invalid(format!("{} is not empty; pass --force to write into it", dir.display())));
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn parse_entry(spec: &str, framework: Framework) -> Result<EntrySpec, CliError> {
    let parts: Vec<&str> = spec.splitn(4, ':').collect();
    if parts.len() < 3 {
        return Err(invalid(format!("entry `{spec}` is not split:n:count[:key=value,...]")));
    }
    let split = parse_split(parts[0]).map_err(invalid)?;
    let n = parts[1].parse().map_err(|_| invalid(format!("entry `{spec}`: bad size `{}`", parts[1])))?;
    let count = parts[2].parse().map_err(|_| invalid(format!("entry `{spec}`: bad count `{}`", parts[2])))?;
    let mut overrides = match parts.get(3) {
        Some(rest) => Overrides::parse(rest.split(',').filter(|s| !s.is_empty())).map_err(invalid)?,
        None => Overrides::default(),
    };
    if framework == Framework::Gls && overrides.gls_mode.is_none() {
        overrides.gls_mode = Some(true);
    }
    Ok(EntrySpec::new(split, n, count).with_overrides(overrides))
}

fn gen_data(a: GenData, exec: Execution) -> Result<(), CliError> {
    let mut specs = if a.entries.is_empty() {
        pathwise_problems::dataset::default_entries(a.framework, a.problem).map_err(invalid)?
    } else {
        a.entries.iter().map(|s| parse_entry(s, a.framework)).collect::<Result<Vec<_>, _>>()?
    };
    if let Some(c) = a.count {
        specs.iter_mut().for_each(|s| s.count = c);
    }
    specs.retain(|s| s.count > 0);
    let mut manifest = Manifest::new(a.framework, a.problem, a.seed_base, &specs).map_err(invalid)?;
    for entry in &manifest.entries {
        if entry.n < a.problem.min_size() {
            return Err(invalid(format!("{} needs n >= {}, got {}", a.problem, a.problem.min_size(), entry.n)));
        }
    }
    check_out_dir(&a.out, a.force)?;
    create_dir(&a.out)?;
    let path = manifest.materialize(&a.out, exec).map_err(runtime)?;
    let total: usize = manifest.entries.iter().map(|e| e.count).sum();
    println!("wrote {total} instances in {} entries to {}", manifest.entries.len(), path.display());
    Ok(())
}

fn load_manifest(path: Option<&Path>, framework: Framework, problem: Problem) -> Result<(Manifest, PathBuf), CliError> {
    match path {
        Some(p) => {
            let (m, dir) = Manifest::load(p).map_err(invalid)?;
            if (m.framework, m.problem) != (framework, problem) {
                return Err(invalid(format!(
                    "manifest is for {}/{}, not {framework}/{problem}",
                    m.framework, m.problem
                )));
            }
            Ok((m, dir))
        }
        None => Ok((Manifest::with_defaults(framework, problem, 0).map_err(invalid)?, PathBuf::new())),
    }
}

fn load_params(path: Option<&Path>, framework: Framework, problem: Problem) -> Result<FrameworkParams, CliError> {
    let params = match path {
        None => framework_defaults(framework, problem).map_err(invalid)?,
        Some(p) => {
            let params: FrameworkParams =
                toml::from_str(&read_file(p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
            if params.framework() != framework {
                return Err(invalid(format!(
                    "{} holds {} parameters, not {framework}",
                    p.display(),
                    params.framework()
                )));
            }
            params
        }
    };
    params.validate().map_err(invalid)?;
    Ok(params)
}

fn baseline_methods(framework: Framework, problem: Problem) -> Result<&'static [&'static str], CliError> {
    Ok(match (framework, problem) {
        (Framework::Constructive, Problem::Tsp | Problem::Kp) => &["greedy-construct"],
        (Framework::Constructive, Problem::BppOnline) => &["best-fit", "first-fit", "lower-bound"],
        (Framework::Aco, _) => &["aco"],
        (Framework::Gls, Problem::Tsp) => &["gls"],
        _ => return Err(invalid(format!("no classical baseline for {framework}/{problem}"))),
    })
}

fn baseline_objective(method: &str, instance: &Instance, params: &FrameworkParams) -> Result<f64, CliError> {
    let fail = |e: &dyn std::fmt::Display| runtime(format!("{method} on {}: {e}", instance.id()));
    let solve = |h: &mut dyn pathwise_problems::frameworks::Heuristic| {
        run_framework(instance, h, params, instance.seed, Deadline::none())
            .map(|o| o.solution.objective)
            .map_err(|e| fail(&e))
    };
    match (method, &instance.data) {
        ("greedy-construct", InstanceData::Tsp(_)) => solve(&mut NearestNeighbor),
        ("greedy-construct", InstanceData::Kp(_)) => solve(&mut ValueDensity),
        ("best-fit", InstanceData::Bpp(b)) => baseline_best_fit(b).map(|s| s.objective).map_err(|e| fail(&e)),
        ("first-fit", InstanceData::Bpp(b)) => baseline_first_fit(b).map(|s| s.objective).map_err(|e| fail(&e)),
        ("lower-bound", InstanceData::Bpp(b)) => bpp_lower_bound(b).map(|v| v as f64).map_err(|e| fail(&e)),
        ("aco" | "gls", _) => solve(&mut ClassicKnowledge { framework: params.framework() }),
        _ => Err(fail(&"instance does not match the method")),
    }
}

#[derive(Serialize)]
struct Record<'a> {
    method: &'a str,
    test_set: &'a str,
    instance: String,
    objective: f64,
}

#[derive(Serialize)]
struct RowSummary<'a> {
    command: &'a str,
    framework: Framework,
    problem: Problem,
    split: &'a str,
    manifest: Option<String>,
    rows: &'a [ReportRow],
}

struct Scored {
    rows: Vec<ReportRow>,
    records: String,
}

/// Loads every entry of the split and scores it with `score`, one row per (method, entry).
fn score_split(
    manifest: &Manifest,
    dir: &Path,
    split: Split,
    methods: &[&str],
    exec: Execution,
    score: impl Fn(&str, &Instance) -> Result<f64, CliError> + Sync,
) -> Result<Scored, CliError> {
    let mut rows = Vec::new();
    let mut records = String::new();
    for entry in manifest.entries(split) {
        let label = entry.label();
        let instances = manifest.instances(dir, entry, exec).map_err(invalid)?;
        for &method in methods {
            let objectives: Vec<f64> =
                map_ordered(&instances, exec, |i| score(method, i)).into_iter().collect::<Result<_, _>>()?;
            for (inst, &objective) in instances.iter().zip(&objectives) {
                let record = Record { method, test_set: &label, instance: inst.id(), objective };
                records.push_str(&serde_json::to_string(&record).expect("records serialize"));
                records.push('\n');
            }
            let row = ReportRow::new(method, label.clone(), &objectives);
            info!("{method} {label}: {:.4}", row.mean_objective);
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(invalid(format!("manifest has no {} entries", split.name())));
    }
    Ok(Scored { rows, records })
}

fn reference_rows(args: &ReferenceArgs, own: &[ReportRow]) -> Result<Option<(Vec<ReportRow>, String)>, CliError> {
    match (&args.reference, &args.reference_method) {
        (_, None) if args.reference.is_some() => Err(invalid("--reference needs --reference-method")),
        (_, None) => Ok(None),
        (Some(path), Some(m)) => Ok(Some((rows_from_tsv(&read_file(path)?)?, m.clone()))),
        (None, Some(m)) => Ok(Some((own.to_vec(), m.clone()))),
    }
}

fn emit_rows(
    command: &str,
    (framework, problem): (Framework, Problem),
    data: &ManifestArgs,
    mut scored: Scored,
    reference: &ReferenceArgs,
    default_reference: Option<&str>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let implicit = ReferenceArgs { reference: None, reference_method: default_reference.map(str::to_string) };
    let chosen =
        if reference.reference_method.is_some() || reference.reference.is_some() { reference } else { &implicit };
    if let Some((ref_rows, method)) = reference_rows(chosen, &scored.rows)? {
        if !ref_rows.iter().any(|r| r.method == method) {
            return Err(invalid(format!("reference method `{method}` is not in the reference rows")));
        }
        apply_reference(&mut scored.rows, &ref_rows, &method, Some(problem));
    }
    let table = rows_to_tsv(&scored.rows);
    print!("{table}");
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("rows.tsv"), &table)?;
        write_file(&dir.join("records.jsonl"), &scored.records)?;
        let summary = RowSummary {
            command,
            framework,
            problem,
            split: data.split.name(),
            manifest: data.manifest.as_ref().map(|p| p.display().to_string()),
            rows: &scored.rows,
        };
        write_file(
            &dir.join("summary.json"),
            &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
        )?;
    }
    Ok(())
}

fn baseline(a: Baseline, exec: Execution) -> Result<(), CliError> {
    let methods = baseline_methods(a.framework, a.problem)?;
    let (manifest, dir) = load_manifest(a.data.manifest.as_deref(), a.framework, a.problem)?;
    let params = load_params(a.data.params.as_deref(), a.framework, a.problem)?;
    if let Some(out) = &a.out {
        check_out_dir(out, a.force)?;
    }
    let scored = score_split(&manifest, &dir, a.data.split, methods, exec, |m, i| baseline_objective(m, i, &params))?;
    let default_reference = methods.contains(&"lower-bound").then_some("lower-bound");
    emit_rows("baseline", (a.framework, a.problem), &a.data, scored, &a.reference, default_reference, a.out.as_deref())
}

fn evaluate_cmd(a: Evaluate, exec: Execution) -> Result<(), CliError> {
    let fallback = a.framework.zip(a.problem);
    let program = HeuristicProgram::load(&a.heuristic, fallback).map_err(invalid)?;
    if a.framework.is_some_and(|f| f != program.framework) || a.problem.is_some_and(|p| p != program.problem) {
        return Err(invalid(format!(
            "{} implements {}/{}, which does not match the requested pair",
            a.heuristic.display(),
            program.framework,
            program.problem
        )));
    }
    let signature = program.signature().map_err(invalid)?;
    let check = sandbox_check(&program.source, Some(signature));
    if !check.clean() {
        return Err(invalid(format!("{} fails the sandbox check: {}", a.heuristic.display(), check.summary())));
    }
    if !(a.instance_time_limit > 0.0 && a.instance_time_limit.is_finite()) {
        return Err(invalid("--instance-time-limit must be positive"));
    }
    let (manifest, dir) = load_manifest(a.data.manifest.as_deref(), program.framework, program.problem)?;
    let params = load_params(a.data.params.as_deref(), program.framework, program.problem)?;
    if let Some(out) = &a.out {
        check_out_dir(out, a.force)?;
    }
    let name = a.name.clone().unwrap_or_else(|| {
        a.heuristic.file_stem().map_or_else(|| "heuristic".into(), |s| s.to_string_lossy().into_owned())
    });
    let config = EvalConfig::new(params, a.instance_time_limit);
    let scored = score_split(&manifest, &dir, a.data.split, &[name.as_str()], exec, |_, inst| {
        let report = evaluate(&program, std::slice::from_ref(inst), &config);
        match report.objectives.first() {
            Some(&o) if report.is_ok() => Ok(o),
            _ => Err(runtime(format!(
                "{} on {}: {} ({})",
                name,
                inst.id(),
                report.status,
                report.message.unwrap_or_default()
            ))),
        }
    })?;
    emit_rows("evaluate", (program.framework, program.problem), &a.data, scored, &a.reference, None, a.out.as_deref())
}

fn config_error(e: ConfigError) -> CliError {
    match e {
        ConfigError::Io { .. } => runtime(e),
        other => invalid(other),
    }
}

fn evolve(a: Evolve, jobs: Option<usize>) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&a.config).map_err(config_error)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(n_e) = a.budget {
        cfg.n_e = n_e;
    }
    if let Some(kind) = a.backend {
        cfg.backend.kind = kind;
    }
    if let Some(j) = jobs.filter(|&j| j > 0) {
        cfg.concurrency = j;
    }
    cfg.validate().map_err(config_error)?;
    check_out_dir(&a.out, a.force)?;
    let outcome = run_config(&cfg, None).map_err(config_error)?;
    create_dir(&a.out)?;
    outcome.write_artifacts(&a.out).map_err(runtime)?;
    println!("{}", serde_json::to_string_pretty(&outcome.summary()).expect("summary serializes"));
    match &outcome.aborted {
        Some(reason) => Err(runtime(format!("run aborted after {} evaluations: {reason}", outcome.evaluations))),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct RunLine {
    run: String,
    best_fitness: Option<f64>,
    evaluations: usize,
    budget: usize,
    steps: usize,
    rounds: usize,
    selection_diversity_rate: Option<f64>,
    aborted: Option<String>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    rows: &'a [ReportRow],
    runs: &'a [RunLine],
    final_curve: Option<&'a CurveSample>,
}

fn runs_tsv(runs: &[RunLine]) -> String {
    let mut out =
        String::from("run\tbest_fitness\tevaluations\tbudget\tsteps\trounds\tselection_diversity_rate\taborted\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in runs {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.run,
            opt(r.best_fitness),
            r.evaluations,
            r.budget,
            r.steps,
            r.rounds,
            opt(r.selection_diversity_rate),
            r.aborted.as_deref().unwrap_or("")
        ));
    }
    out
}

fn report(a: Report) -> Result<(), CliError> {
    let mut tables = Vec::new();
    let mut curves = Vec::new();
    let mut runs = Vec::new();
    let mut problem: Option<Problem> = None;
    let mut note_problem = |p: Problem| -> Result<(), CliError> {
        match problem {
            Some(q) if q != p => Err(invalid(format!("directories mix problems {q} and {p}"))),
            _ => {
                problem = Some(p);
                Ok(())
            }
        }
    };
    for dir in &a.dirs {
        let curve_path = dir.join("curve.csv");
        let rows_path = dir.join("rows.tsv");
        if !curve_path.exists() && !rows_path.exists() {
            return Err(invalid(format!("{} holds neither curve.csv nor rows.tsv", dir.display())));
        }
        let summary_text =
            dir.join("summary.json").exists().then(|| read_file(&dir.join("summary.json"))).transpose()?;
        if curve_path.exists() {
            curves.push(curve_from_csv(&read_file(&curve_path)?)?);
            let text =
                summary_text.as_deref().ok_or_else(|| invalid(format!("{} has no summary.json", dir.display())))?;
            let s: Summary = serde_json::from_str(text).map_err(|e| invalid(format!("{}: {e}", dir.display())))?;
            note_problem(s.problem)?;
            runs.push(RunLine {
                run: dir.display().to_string(),
                best_fitness: s.best_fitness.value(),
                evaluations: s.evaluations,
                budget: s.budget,
                steps: s.steps,
                rounds: s.rounds,
                selection_diversity_rate: s.selection_diversity_rate,
                aborted: s.aborted,
            });
        }
        if rows_path.exists() {
            tables.push(rows_from_tsv(&read_file(&rows_path)?)?);
            if let Some(text) = &summary_text {
                let v: serde_json::Value =
                    serde_json::from_str(text).map_err(|e| invalid(format!("{}: {e}", dir.display())))?;
                if let Some(p) = v.get("problem").and_then(|p| p.as_str()) {
                    note_problem(p.parse().map_err(invalid)?)?;
                }
            }
        }
    }
    let mut rows = merge_rows(&tables);
    if let Some((ref_rows, method)) = reference_rows(&a.reference, &rows)? {
        if !ref_rows.iter().any(|r| r.method == method) {
            return Err(invalid(format!("reference method `{method}` is not in the reference rows")));
        }
        apply_reference(&mut rows, &ref_rows, &method, problem);
    }
    if let Some(out) = &a.out {
        check_out_dir(out, a.force)?;
    }
    let samples = aggregate_curves(&curves);
    if !rows.is_empty() {
        print!("{}", rows_to_tsv(&rows));
    }
    if !runs.is_empty() {
        print!("{}", runs_tsv(&runs));
        if let Some(last) = samples.last() {
            println!(
                "best-so-far at {} evaluations over {} runs: mean {} (min {}, max {})",
                last.evaluations, last.runs, last.mean, last.min, last.max
            );
        }
    }
    if let Some(out) = &a.out {
        create_dir(out)?;
        if !rows.is_empty() {
            write_file(&out.join("rows.tsv"), &rows_to_tsv(&rows))?;
        }
        if !runs.is_empty() {
            write_file(&out.join("runs.tsv"), &runs_tsv(&runs))?;
            write_file(&out.join("curve_mean.csv"), &curve_samples_csv(&samples))?;
        }
        let json = ReportJson { rows: &rows, runs: &runs, final_curve: samples.last() };
        write_file(
            &out.join("report.json"),
            &(serde_json::to_string_pretty(&json).expect("report serializes") + "\n"),
        )?;
    }
    Ok(())
}
