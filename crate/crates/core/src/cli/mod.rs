//! Batch experiment commands: single runs, parameter sweeps, and the
//! dual-role ablation. Every command writes per-run artifacts plus a CSV table.

mod overrides;

pub use overrides::set_path;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::engine::{
    events_csv, run, samples_csv, summarize, summary_json, ConfigError, EngineError, ScenarioConfig, SummaryRecord,
};

/// Number of parallel runs for `sweep` and `ablate`.
pub const WORKERS_ENV: &str = "AIRGROUND_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "airground", version, about = "Air-ground multi-robot exploration simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write events.csv, samples.csv and summary.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a parameter sweep described by an experiment spec.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Run each seed with and without the UAV relay role.
    Ablate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(c) => CliError::Config(c),
            EngineError::Io { path, source } => CliError::Io { path, source },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the scenario, e.g. `roster.ugv_count`.
    pub param: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Base scenario, relative to the spec file.
    pub scenario: PathBuf,
    pub sweep: SweepAxis,
    pub seeds: Vec<u64>,
    /// Output directory, relative to the spec file.
    pub out: PathBuf,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::new("seeds", "at least one seed is required"));
        }
        if self.sweep.values.is_empty() {
            return Err(ConfigError::new("sweep.values", "at least one value is required"));
        }
        if self.sweep.param.is_empty() {
            return Err(ConfigError::new("sweep.param", "must name a scenario field"));
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Reads a scenario as raw JSON so that overrides can be applied before typing.
pub fn load_scenario_value(path: &Path) -> Result<Value, CliError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| ConfigError::new("scenario", format!("{}: {e}", path.display())).into())
}

/// Types a scenario document and resolves its relative paths against `base`.
pub fn scenario_from_value(doc: &Value, base: &Path) -> Result<ScenarioConfig, ConfigError> {
    let mut config = ScenarioConfig::from_json(&doc.to_string())?;
    config.resolve_paths(base);
    Ok(config)
}

/// Runs one scenario and writes its artifacts into `out`.
pub fn run_to_dir(config: &ScenarioConfig, out: &Path) -> Result<SummaryRecord, CliError> {
    let log = run(config)?;
    let summary = summarize(&log);
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write(&out.join("events.csv"), &events_csv(&log.events))?;
    write(&out.join("samples.csv"), &samples_csv(&log.samples))?;
    write(&out.join("summary.json"), &summary_json(&summary))?;
    Ok(summary)
}

pub fn cmd_run(scenario: &Path, seed: Option<u64>, out: &Path) -> Result<SummaryRecord, CliError> {
    let mut doc = load_scenario_value(scenario)?;
    if let Some(seed) = seed {
        set_path(&mut doc, "seed", seed.into())?;
    }
    let config = scenario_from_value(&doc, &base_dir(scenario))?;
    run_to_dir(&config, out)
}

fn workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// Maps `f` over `jobs` on the configured number of workers, keeping order.
fn parallel_map<T: Sync, R: Send>(jobs: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    let n = workers();
    if n == 1 {
        return jobs.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
        Ok(pool) => pool.install(|| jobs.par_iter().map(&f).collect()),
        Err(_) => jobs.iter().map(f).collect(),
    }
}

/// Renders a JSON value for a CSV cell or directory name.
fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn status_of(result: &Result<SummaryRecord, CliError>) -> String {
    match result {
        Ok(_) => "ok".to_string(),
        Err(CliError::Config(e)) => format!("config_error: {e}"),
        Err(e @ CliError::Io { .. }) => format!("io_error: {e}"),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

fn summary_cells(result: &Result<SummaryRecord, CliError>) -> Vec<String> {
    match result {
        Ok(s) => vec![
            s.goals_visited.to_string(),
            s.goals_total.to_string(),
            format!("{:.3}", s.mean_time_to_goal),
            format!("{:.3}", s.delivery_latency.p50),
            fmt_opt(s.completion_time),
            format!("{:.4}", s.navigating_fraction),
            s.relay_phases.to_string(),
            s.world_hash.clone(),
        ],
        Err(_) => vec![String::new(); 8],
    }
}

const SUMMARY_COLUMNS: [&str; 8] = [
    "goals_visited",
    "goals_total",
    "mean_time_to_goal",
    "p50_delivery_latency",
    "completion_time",
    "navigating_fraction",
    "relay_phases",
    "world_hash",
];

fn csv_text(header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// Runs every `(value, seed)` combination and writes `sweep.csv` into the
/// spec's output directory. Failed runs get an error status; the sweep goes on.
pub fn cmd_sweep(spec_path: &Path) -> Result<Vec<Result<SummaryRecord, CliError>>, CliError> {
    let spec: ExperimentSpec = serde_json::from_str(&read(spec_path)?)
        .map_err(|e| ConfigError::new("spec", format!("{}: {e}", spec_path.display())))?;
    spec.validate()?;
    let base = base_dir(spec_path);
    let scenario_path = base.join(&spec.scenario);
    let out = base.join(&spec.out);
    let doc = load_scenario_value(&scenario_path)?;
    let scenario_base = base_dir(&scenario_path);

    let jobs: Vec<(Value, u64)> = spec
        .sweep
        .values
        .iter()
        .flat_map(|v| spec.seeds.iter().map(move |&s| (v.clone(), s)))
        .collect();
    let param = spec.sweep.param.as_str();
    let results = parallel_map(&jobs, |(value, seed)| {
        let mut d = doc.clone();
        set_path(&mut d, param, value.clone())?;
        set_path(&mut d, "seed", (*seed).into())?;
        let config = scenario_from_value(&d, &scenario_base)?;
        let dir = out
            .join("runs")
            .join(format!("{param}={}", value_label(value)))
            .join(format!("seed={seed}"));
        run_to_dir(&config, &dir)
    });

    let mut header = vec![param.to_string(), "seed".into(), "status".into()];
    header.extend(SUMMARY_COLUMNS.iter().map(|s| s.to_string()));
    let rows = jobs
        .iter()
        .zip(&results)
        .map(|((v, s), r)| {
            let mut row = vec![value_label(v), s.to_string(), status_of(r)];
            row.extend(summary_cells(r));
            row
        })
        .collect();
    write(&out.join("sweep.csv"), &csv_text(header, rows))?;
    Ok(results)
}

/// Runs each seed with `dual_role` on and off and writes paired rows to
/// `ablate.csv`.
pub fn cmd_ablate(
    scenario: &Path,
    seeds: &[u64],
    out: &Path,
) -> Result<Vec<Result<SummaryRecord, CliError>>, CliError> {
    if seeds.is_empty() {
        return Err(ConfigError::new("seeds", "at least one seed is required").into());
    }
    let doc = load_scenario_value(scenario)?;
    let base = base_dir(scenario);
    let jobs: Vec<(u64, bool)> = seeds.iter().flat_map(|&s| [(s, true), (s, false)]).collect();
    let results = parallel_map(&jobs, |&(seed, dual)| {
        let mut d = doc.clone();
        set_path(&mut d, "roster.policy.dual_role", dual.into())?;
        set_path(&mut d, "seed", seed.into())?;
        let config = scenario_from_value(&d, &base)?;
        let dir = out
            .join("runs")
            .join(format!("seed={seed}"))
            .join(format!("dual_role={dual}"));
        run_to_dir(&config, &dir)
    });
    let mut header = vec!["seed".to_string(), "dual_role".into(), "status".into()];
    header.extend(SUMMARY_COLUMNS.iter().map(|s| s.to_string()));
    let rows = jobs
        .iter()
        .zip(&results)
        .map(|(&(seed, dual), r)| {
            let mut row = vec![seed.to_string(), dual.to_string(), status_of(r)];
            row.extend(summary_cells(r));
            row
        })
        .collect();
    write(&out.join("ablate.csv"), &csv_text(header, rows))?;
    Ok(results)
}

fn report(results: &[Result<SummaryRecord, CliError>]) {
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed > 0 {
        eprintln!(
            "warning: {failed} of {} runs failed; see the status column",
            results.len()
        );
    }
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Run { scenario, seed, out } => cmd_run(&scenario, seed, &out).map(|s| {
            println!(
                "goals visited {}/{}; mean time to goal {:.1} s",
                s.goals_visited, s.goals_total, s.mean_time_to_goal
            );
        }),
        Command::Sweep { spec } => cmd_sweep(&spec).map(|r| report(&r)),
        Command::Ablate { scenario, seeds, out } => cmd_ablate(&scenario, &seeds, &out).map(|r| report(&r)),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
