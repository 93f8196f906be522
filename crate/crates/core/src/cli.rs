//! Command-line front end: single runs, parameter sweeps, trace
//! verification and graph export.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::dyngraph::{GraphTrace, TraceFormatError};
use crate::engine::config::{parse_pairs, CONFIG_KEYS};
use crate::engine::trace::TraceParseError;
use crate::engine::{run, Algorithm, ConfigError, EngineError, Outcome, RunOutput, ScenarioConfig};
use crate::verify::{compute_metrics, enqueue_order, verify_all, Metrics, Report};

/// Environment variable naming the default output directory of `run`.
pub const OUT_DIR_ENV: &str = "DQSIM_OUT_DIR";

pub const CSV_HEADER: &str = "scenario_id,algorithm,adversary,schedule,policy,n,k,T,alpha,rounds_total,cycles_used,max_tailless,checks_passed,seed";

#[derive(Parser, Debug)]
#[command(
    name = "dynqueue",
    version,
    about = "Distributed queuing in adversarial dynamic networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one scenario and write its trace, graph history, report and CSV row.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to $DQSIM_OUT_DIR, then `out`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Config overrides as `--key value` pairs.
        #[arg(
            trailing_var_arg = true,
            allow_hyphen_values = true,
            value_name = "--KEY VALUE"
        )]
        overrides: Vec<String>,
    },
    /// Run every cell of a grid and write one CSV row per cell.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Check a saved trace and print the report.
    VerifyTrace {
        file: PathBuf,
        /// Graph history for the influence check.
        #[arg(long)]
        graphs: Option<PathBuf>,
    },
    /// Run a scenario and print its graph history.
    ExportGraph {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("override `{0}` has no value")]
    DanglingOverride(String),
    #[error("override `{0}` is not of the form --key")]
    BadOverride(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Trace(#[from] TraceParseError),
    #[error(transparent)]
    Graph(#[from] TraceFormatError),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    /// 2 for unusable input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::DanglingOverride(_)
            | CliError::BadOverride(_)
            | CliError::Trace(_)
            | CliError::Graph(_)
            | CliError::Io { .. }
            | CliError::Engine(EngineError::Config(_) | EngineError::Workload(_)) => 2,
            _ => 1,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses argv and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Run {
            config,
            out_dir,
            overrides,
        } => {
            let out_dir = out_dir
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            run_single(&config, &overrides, &out_dir)
        }
        Command::Sweep { grid, out, workers } => {
            let text = run_sweep(&read(&grid)?, workers)?;
            write(&out, &text)?;
            Ok(0)
        }
        Command::VerifyTrace { file, graphs } => {
            let trace = crate::engine::Trace::from_text(&read(&file)?)?;
            let graphs = graphs
                .map(|g| read(&g).and_then(|t| Ok(GraphTrace::from_text(&t)?)))
                .transpose()?;
            let report = verify_all(&trace, graphs.as_ref(), None);
            print!("{}", report.to_text());
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::ExportGraph { config, out } => {
            let cfg = ScenarioConfig::parse(&read(&config)?)?;
            let output = run(&cfg)?;
            let text = output.graphs.to_text();
            match out {
                Some(p) => write(&p, &text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

/// Applies `--key value` pairs on top of a parsed config map.
pub fn apply_overrides(
    map: &mut BTreeMap<String, String>,
    args: &[String],
) -> Result<(), CliError> {
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let key = flag
            .strip_prefix("--")
            .filter(|k| !k.is_empty())
            .ok_or_else(|| CliError::BadOverride(flag.clone()))?;
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::DanglingOverride(flag.clone()))?;
                (key.to_string(), v.clone())
            }
        };
        map.insert(key, value);
    }
    Ok(())
}

/// Stable identifier built from the fields that distinguish grid cells.
pub fn scenario_id(cfg: &ScenarioConfig) -> String {
    format!(
        "{}-{}-{}-{}-n{}-k{}-T{}-s{}",
        cfg.algorithm,
        cfg.adversary.name(),
        cfg.schedule.name(),
        cfg.policy.name(),
        cfg.n,
        cfg.k,
        cfg.t,
        cfg.seed
    )
}

pub fn csv_row(cfg: &ScenarioConfig, metrics: &Metrics, checks_passed: bool) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        scenario_id(cfg),
        cfg.algorithm,
        cfg.adversary.name(),
        cfg.schedule.name(),
        cfg.policy.name(),
        cfg.n,
        cfg.k,
        cfg.t,
        metrics.alpha.unwrap_or(0),
        metrics.rounds_total,
        metrics.cycles_used,
        metrics.max_tailless_span,
        checks_passed,
        cfg.seed
    )
}

/// Verification report for a finished run, checked against the
/// schedule's full issuer list.
pub fn report_for(output: &RunOutput) -> Report {
    let issuers = output.schedule.issuers();
    verify_all(&output.trace, Some(&output.graphs), Some(&issuers))
}

/// The baseline never enqueued anything before its horizon.
pub fn is_no_progress(output: &RunOutput) -> bool {
    output.config.algorithm == Algorithm::NoRep
        && output.outcome == Outcome::HorizonExceeded
        && enqueue_order(&output.trace).is_empty()
}

fn run_single(config: &Path, overrides: &[String], out_dir: &Path) -> Result<i32, CliError> {
    let mut map = parse_pairs(&read(config)?)?;
    apply_overrides(&mut map, overrides)?;
    let cfg = ScenarioConfig::from_map(&map)?;
    let output = run(&cfg)?;
    let report = report_for(&output);
    let metrics = compute_metrics(&output.trace);

    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let id = scenario_id(&cfg);
    write(
        &out_dir.join(format!("{id}.trace")),
        &output.trace.to_text(),
    )?;
    write(
        &out_dir.join(format!("{id}.graph")),
        &output.graphs.to_text(),
    )?;
    write(&out_dir.join(format!("{id}.report")), &report.to_text())?;
    let row = csv_row(&cfg, &metrics, report.passed());
    write(
        &out_dir.join(format!("{id}.csv")),
        &format!("{CSV_HEADER}\n{row}\n"),
    )?;

    print!("{}", report.to_text());
    println!("{CSV_HEADER}\n{row}");
    if is_no_progress(&output) {
        println!("NOPROGRESS after {} rounds", output.rounds());
        return Ok(0);
    }
    let ok = report.passed() && output.outcome != Outcome::HorizonExceeded;
    Ok(if ok { 0 } else { 1 })
}

/// Grid axes; every key but `window`, `rate`, `edge_prob` and `horizon`
/// is a comma-separated list.
const GRID_KEYS: &[&str] = &[
    "n",
    "k",
    "T",
    "algorithm",
    "adversary",
    "schedule",
    "policy",
    "seeds",
    "window",
    "rate",
    "edge_prob",
    "horizon",
    "termination",
    "head",
];

/// Expands a grid file into per-cell config maps, in deterministic order.
pub fn grid_cells(text: &str) -> Result<Vec<BTreeMap<String, String>>, CliError> {
    let map = parse_pairs(text)?;
    if let Some(k) = map.keys().find(|k| !GRID_KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey(k.clone()).into());
    }
    let list = |key: &str, default: Option<&str>| -> Vec<String> {
        map.get(key)
            .map(|v| v.as_str())
            .or(default)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    };
    let axes = [
        ("algorithm", list("algorithm", None)),
        ("adversary", list("adversary", None)),
        ("schedule", list("schedule", None)),
        ("policy", list("policy", Some("lex_smallest"))),
        ("n", list("n", None)),
        ("k", list("k", None)),
        ("T", list("T", Some("1"))),
        ("seed", list("seeds", Some("0"))),
    ];
    let mut cells: Vec<BTreeMap<String, String>> = vec![BTreeMap::new()];
    for (key, values) in &axes {
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.insert(key.to_string(), v.clone());
                    c
                })
            })
            .collect();
    }
    let window = map.get("window").cloned().unwrap_or_else(|| "0".into());
    let rate = map.get("rate").cloned().unwrap_or_else(|| "1".into());
    for cell in &mut cells {
        let seed = cell["seed"].clone();
        let sched = cell.get_mut("schedule").expect("schedule axis");
        match sched.as_str() {
            "dynamic" => *sched = format!("dynamic({window},{seed})"),
            "continuous" => *sched = format!("continuous({rate})"),
            _ => {}
        }
        for key in ["edge_prob", "horizon", "termination", "head"] {
            if let Some(v) = map.get(key) {
                cell.insert(key.to_string(), v.clone());
            }
        }
        debug_assert!(cell.keys().all(|k| CONFIG_KEYS.contains(&k.as_str())));
    }
    Ok(cells)
}

fn error_row(cell: &BTreeMap<String, String>) -> String {
    let get = |k: &str| {
        cell.get(k)
            .map(|v| v.split('(').next().unwrap_or(v).to_string())
            .unwrap_or_default()
    };
    format!(
        "error-{}-{}-n{}-k{}-T{}-s{},{},{},{},{},{},{},{},error,error,error,error,error,{}",
        get("algorithm"),
        get("adversary"),
        get("n"),
        get("k"),
        get("T"),
        get("seed"),
        get("algorithm"),
        get("adversary"),
        get("schedule"),
        get("policy"),
        get("n"),
        get("k"),
        get("T"),
        get("seed"),
    )
}

fn sweep_row(cell: &BTreeMap<String, String>) -> String {
    let Ok(cfg) = ScenarioConfig::from_map(cell) else {
        return error_row(cell);
    };
    match run(&cfg) {
        Ok(output) => {
            let report = report_for(&output);
            let passed = report.passed() && output.outcome != Outcome::HorizonExceeded;
            csv_row(&cfg, &compute_metrics(&output.trace), passed)
        }
        Err(_) => error_row(cell),
    }
}

/// Runs a grid on a worker pool and returns the CSV text, rows in grid
/// order. A grid missing any required axis has no cells.
pub fn run_sweep(grid: &str, workers: usize) -> Result<String, CliError> {
    let cells = grid_cells(grid)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    let rows: Vec<String> = pool.install(|| cells.par_iter().map(sweep_row).collect());
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}
