use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use smoothrl::harness::{
    emit_tradeoff_data, identify_dollhouse, metrics_csv, recompute_metrics, run_experiment, ExperimentConfig,
    IdentifyConfig, ResultsTable,
};
use smoothrl::sysid::export_coefficients;
use smoothrl::Error;

#[derive(Parser)]
#[command(name = "smoothrl", version, about = "Derivative-order action smoothness experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (order, seed) pair and write results.csv, runs.csv, curves and a manifest.
    Run(RunArgs),
    /// Identify the DollHouse dynamics with STLSQ from random-policy logs.
    Identify(IdentifyArgs),
    /// Recompute smoothness metrics from trajectory files.
    Metrics(MetricsArgs),
    /// Write tradeoff.csv from the results.csv of a finished run.
    Tradeoff(TradeoffArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Comma-separated penalty orders in 0..=3.
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<u8>>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    env: Option<String>,
    /// Environment steps per run.
    #[arg(long)]
    budget: Option<usize>,
    /// Runs trained in parallel.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct IdentifyArgs {
    /// Identification config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the random-policy logs (first value is used).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Number of logged episodes.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Trajectory files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TradeoffArgs {
    /// Directory of a finished `run`.
    #[arg(long)]
    out: PathBuf,
    /// Environment label; read from manifest.json when omitted.
    #[arg(long)]
    env: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn report(&self) -> serde_json::Value {
        let (kind, message) = match self {
            CliError::Core(e) => (e.kind(), e.to_string()),
            CliError::Usage(m) => ("usage", m.clone()),
        };
        json!({ "status": "error", "kind": kind, "message": message })
    }
}

type CliResult<T> = Result<T, CliError>;

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    }))
}

fn run(args: RunArgs) -> CliResult<serde_json::Value> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seeds {
        cfg.seeds = s;
    }
    if let Some(o) = args.orders {
        cfg.orders = o;
    }
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(e) = args.env {
        cfg.env_id = e;
    }
    if let Some(b) = args.budget {
        cfg.ppo.total_steps = b;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j;
    }
    let out = run_experiment(&cfg, Some(&args.out))?;
    let diverged = out.runs.iter().filter(|r| r.metrics.is_none()).count();
    Ok(json!({
        "status": "ok",
        "out": args.out,
        "runs": out.runs.len(),
        "diverged": diverged,
        "results": out.table,
    }))
}

fn identify(args: IdentifyArgs) -> CliResult<serde_json::Value> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            toml::from_str::<IdentifyConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => IdentifyConfig::default(),
    };
    if let Some(s) = args.seeds.as_ref().and_then(|s| s.first()) {
        cfg.seed = *s;
    }
    if let Some(b) = args.budget {
        cfg.episodes = b;
    }
    let report = identify_dollhouse(&cfg)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let value = serde_json::to_value(&report).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        export_coefficients(&report.model, &report.library, dir.join("coefficients.csv"))?;
        write(&dir.join("identify.json"), &format!("{:#}\n", value))?;
    }
    Ok(json!({ "status": "ok", "report": value }))
}

fn metrics(args: MetricsArgs) -> CliResult<Option<serde_json::Value>> {
    let rows = recompute_metrics(&args.files)?;
    let csv = metrics_csv(&rows);
    match &args.out {
        Some(p) => {
            write(p, &csv)?;
            Ok(Some(json!({ "status": "ok", "out": p, "files": rows.len() })))
        }
        None => {
            print!("{csv}");
            Ok(None)
        }
    }
}

fn tradeoff(args: TradeoffArgs) -> CliResult<serde_json::Value> {
    let results = args.out.join("results.csv");
    let text = std::fs::read_to_string(&results).map_err(|e| Error::Io {
        path: results.clone(),
        source: e,
    })?;
    let env_id = match args.env {
        Some(e) => e,
        None => {
            let path = args.out.join("manifest.json");
            let manifest = std::fs::read_to_string(&path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let v: serde_json::Value =
                serde_json::from_str(&manifest).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            v["env_id"]
                .as_str()
                .ok_or_else(|| CliError::Usage(format!("{} has no env_id", path.display())))?
                .to_string()
        }
    };
    let table = ResultsTable::from_csv(&text, &env_id)?;
    let path = args.out.join("tradeoff.csv");
    emit_tradeoff_data(&table, &path)?;
    Ok(json!({ "status": "ok", "out": path, "orders": table.rows.len() }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a).map(Some),
        Command::Identify(a) => identify(a).map(Some),
        Command::Metrics(a) => metrics(a),
        Command::Tradeoff(a) => tradeoff(a).map(Some),
    };
    match result {
        Ok(Some(v)) => {
            println!("{v:#}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(1)
        }
    }
}
