use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::envs::make_env;
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::metrics::{percent_reduction, summarize};
use crate::nn::save_checkpoint;
use crate::rng::SeededRng;
use crate::smoothing::PenaltyConfig;
use crate::trainer::{train, CurvePoint, TrainOutput};
use crate::trajectory::save_trajectory;

use super::config::{config_hash, ppo_config_hash, ExperimentConfig};

/// Per-run metrics: means over that run's final evaluation episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunMetrics {
    pub return_raw: f64,
    pub return_shaped: f64,
    pub jerk_std: f64,
    pub total_variation: f64,
    pub switching_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "error", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged(String),
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub order: u8,
    pub seed: u64,
    pub lambda: f64,
    pub status: RunStatus,
    pub metrics: Option<RunMetrics>,
    pub output: Option<TrainOutput>,
}

impl RunRecord {
    fn from_output(order: u8, seed: u64, lambda: f64, output: TrainOutput) -> Result<Self> {
        let eps = &output.eval_episodes;
        if eps.is_empty() {
            return Err(Error::Invariant(format!("run order {order} seed {seed} produced no evaluation")));
        }
        let n = eps.len() as f64;
        let mean = |f: &dyn Fn(&crate::metrics::SmoothnessReport) -> f64| eps.iter().map(|e| f(&e.report)).sum::<f64>() / n;
        let metrics = RunMetrics {
            return_raw: mean(&|r| r.episode_return_raw),
            return_shaped: mean(&|r| r.episode_return_shaped),
            jerk_std: mean(&|r| r.jerk_std),
            total_variation: mean(&|r| r.total_variation),
            switching_count: mean(&|r| r.switching_count as f64),
        };
        Ok(Self {
            order,
            seed,
            lambda,
            status: RunStatus::Completed,
            metrics: Some(metrics),
            output: Some(output),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation across seeds.
    pub sd: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Result<Self> {
        let (mean, sd) = summarize(values)?;
        Ok(Self { mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultsRow {
    pub order: u8,
    pub lambda: f64,
    pub completed: usize,
    pub diverged: usize,
    /// `None` when every run of this order diverged.
    pub return_raw: Option<Stat>,
    pub return_shaped: Option<Stat>,
    pub jerk_std: Option<Stat>,
    pub total_variation: Option<Stat>,
    pub switching_count: Option<Stat>,
    /// Percent reductions of the mean against the order-0 row.
    pub jerk_reduction_pct: Option<f64>,
    pub switching_reduction_pct: Option<f64>,
}

/// One row per penalty order, ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultsTable {
    pub env_id: String,
    pub has_equipment: bool,
    pub rows: Vec<ResultsRow>,
}

const RESULTS_HEADER: &str = "order,lambda,runs_completed,runs_diverged,\
return_raw_mean,return_raw_sd_seeds,return_shaped_mean,return_shaped_sd_seeds,\
jerk_std_mean,jerk_std_sd_seeds,total_variation_mean,total_variation_sd_seeds,\
switching_count_mean,switching_count_sd_seeds,jerk_reduction_pct_vs_order0,switching_reduction_pct_vs_order0";

impl ResultsTable {
    /// Aggregates completed runs per order. Reductions appear only when an
    /// order-0 row with a positive mean exists.
    pub fn from_runs(env_id: &str, has_equipment: bool, runs: &[RunRecord]) -> Result<Self> {
        let mut orders: Vec<u8> = runs.iter().map(|r| r.order).collect();
        orders.sort_unstable();
        orders.dedup();
        let mut rows = Vec::new();
        for order in orders {
            let group: Vec<&RunRecord> = runs.iter().filter(|r| r.order == order).collect();
            let done: Vec<RunMetrics> = group.iter().filter_map(|r| r.metrics).collect();
            let stat = |f: fn(&RunMetrics) -> f64| -> Result<Option<Stat>> {
                if done.is_empty() {
                    Ok(None)
                } else {
                    Stat::of(&done.iter().map(f).collect::<Vec<_>>()).map(Some)
                }
            };
            rows.push(ResultsRow {
                order,
                lambda: group[0].lambda,
                completed: done.len(),
                diverged: group.len() - done.len(),
                return_raw: stat(|m| m.return_raw)?,
                return_shaped: stat(|m| m.return_shaped)?,
                jerk_std: stat(|m| m.jerk_std)?,
                total_variation: stat(|m| m.total_variation)?,
                switching_count: if has_equipment { stat(|m| m.switching_count)? } else { None },
                jerk_reduction_pct: None,
                switching_reduction_pct: None,
            });
        }
        let mut table = Self {
            env_id: env_id.into(),
            has_equipment,
            rows,
        };
        table.fill_reductions();
        Ok(table)
    }

    fn fill_reductions(&mut self) {
        let Some(base) = self.row(0).cloned() else { return };
        let reduce = |b: Option<Stat>, t: Option<Stat>| match (b, t) {
            (Some(b), Some(t)) => percent_reduction(b.mean, t.mean).ok(),
            _ => None,
        };
        for row in self.rows.iter_mut().filter(|r| r.order != 0) {
            row.jerk_reduction_pct = reduce(base.jerk_std, row.jerk_std);
            row.switching_reduction_pct = reduce(base.switching_count, row.switching_count);
        }
    }

    pub fn row(&self, order: u8) -> Option<&ResultsRow> {
        self.rows.iter().find(|r| r.order == order)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(RESULTS_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            let mut cells = vec![r.order.to_string(), fmt_f64(r.lambda), r.completed.to_string(), r.diverged.to_string()];
            for s in [r.return_raw, r.return_shaped, r.jerk_std, r.total_variation, r.switching_count] {
                cells.push(opt(s.map(|s| s.mean)));
                cells.push(opt(s.map(|s| s.sd)));
            }
            cells.push(opt(r.jerk_reduction_pct));
            cells.push(opt(r.switching_reduction_pct));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`ResultsTable::to_csv`].
    pub fn from_csv(text: &str, env_id: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: PathBuf::from("results.csv"),
            line,
            message,
        };
        let mut lines = text.lines();
        if lines.next() != Some(RESULTS_HEADER) {
            return Err(parse_err(1, "unexpected header".into()));
        }
        let mut rows = Vec::new();
        let mut has_equipment = false;
        for (i, line) in lines.enumerate() {
            let ln = i + 2;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 16 {
                return Err(parse_err(ln, format!("expected 16 fields, got {}", cells.len())));
            }
            let num = |k: usize| -> Result<Option<f64>> {
                if cells[k].is_empty() {
                    Ok(None)
                } else {
                    cells[k].parse().map(Some).map_err(|e| parse_err(ln, format!("field {k}: {e}")))
                }
            };
            let int = |k: usize| -> Result<usize> { cells[k].parse().map_err(|e| parse_err(ln, format!("field {k}: {e}"))) };
            let stat = |k: usize| -> Result<Option<Stat>> {
                Ok(match (num(k)?, num(k + 1)?) {
                    (Some(mean), Some(sd)) => Some(Stat { mean, sd }),
                    _ => None,
                })
            };
            let switching_count = stat(12)?;
            has_equipment |= switching_count.is_some();
            rows.push(ResultsRow {
                order: int(0)? as u8,
                lambda: num(1)?.unwrap_or(0.0),
                completed: int(2)?,
                diverged: int(3)?,
                return_raw: stat(4)?,
                return_shaped: stat(6)?,
                jerk_std: stat(8)?,
                total_variation: stat(10)?,
                switching_count,
                jerk_reduction_pct: num(14)?,
                switching_reduction_pct: num(15)?,
            });
        }
        Ok(Self {
            env_id: env_id.into(),
            has_equipment,
            rows,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestRun {
    pub order: u8,
    pub seed: u64,
    pub lambda: f64,
    pub ppo_config_hash: String,
    #[serde(flatten)]
    pub status: RunStatus,
}

/// Machine-readable description of an experiment and its runs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub rng: &'static str,
    pub env_id: String,
    pub orders: Vec<u8>,
    pub lambda: f64,
    pub seeds: Vec<u64>,
    pub config_hash: String,
    /// Shared by every run; equal hashes per run show the orders were trained alike.
    pub ppo_config_hash: String,
    pub reward_reported: &'static str,
    pub sd_convention: &'static str,
    pub runs: Vec<ManifestRun>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub table: ResultsTable,
    pub runs: Vec<RunRecord>,
    pub manifest: Manifest,
}

/// Trains every (order, seed) pair and aggregates the evaluation metrics.
///
/// Runs execute on up to `config.jobs` threads; collection and every output
/// file follow ascending (order, seed) regardless of completion order. A
/// diverged run is kept in the manifest and excluded from the table.
pub fn run_experiment(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    let jobs: Vec<(u8, u64)> = config
        .sorted_orders()
        .into_iter()
        .flat_map(|o| seeds.iter().map(move |s| (o, *s)))
        .collect();

    let results: Vec<Mutex<Option<Result<TrainOutput>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(&(order, seed)) = jobs.get(i) else { break };
        let res = PenaltyConfig::new(order, config.lambda_for(order))
            .and_then(|p| train(&config.env_id, &config.env, p, config.ppo.clone(), seed));
        log::info!("order {order} seed {seed}: {}", if res.is_ok() { "done" } else { "failed" });
        *results[i].lock().expect("result slot") = Some(res);
    };
    std::thread::scope(|s| {
        for _ in 0..config.jobs.min(jobs.len()) {
            s.spawn(worker);
        }
    });

    let mut runs = Vec::with_capacity(jobs.len());
    for (&(order, seed), slot) in jobs.iter().zip(results) {
        let lambda = config.lambda_for(order);
        let res = slot.into_inner().expect("result slot").expect("every job ran");
        runs.push(match res {
            Ok(output) => RunRecord::from_output(order, seed, lambda, output)?,
            Err(Error::Diverged(msg)) => {
                log::warn!("order {order} seed {seed} diverged: {msg}");
                RunRecord {
                    order,
                    seed,
                    lambda,
                    status: RunStatus::Diverged(msg),
                    metrics: None,
                    output: None,
                }
            }
            Err(e) => return Err(e),
        });
    }

    let has_equipment = !make_env(&config.env_id, &config.env)?.spec().equipment_indices.is_empty();
    let table = ResultsTable::from_runs(&config.env_id, has_equipment, &runs)?;
    let ppo_hash = ppo_config_hash(&config.ppo);
    let manifest = Manifest {
        tool: "smoothrl",
        version: env!("CARGO_PKG_VERSION"),
        rng: SeededRng::ALGORITHM,
        env_id: config.env_id.clone(),
        orders: config.sorted_orders(),
        lambda: config.lambda,
        seeds,
        config_hash: config_hash(config)?,
        ppo_config_hash: ppo_hash.clone(),
        reward_reported: "raw environment reward, derivative penalty excluded (shaped return also listed)",
        sd_convention: "*_sd_seeds columns: sample std (n-1) of per-seed means; jerk_std itself is a population std within episodes",
        runs: runs
            .iter()
            .map(|r| ManifestRun {
                order: r.order,
                seed: r.seed,
                lambda: r.lambda,
                ppo_config_hash: ppo_hash.clone(),
                status: r.status.clone(),
            })
            .collect(),
    };
    let output = ExperimentOutput { table, runs, manifest };
    if let Some(dir) = out_dir {
        write_artifacts(config, &output, dir)?;
    }
    Ok(output)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from("step,mean_eval_return_raw,mean_eval_return_shaped,jerk_std,switching_count\n");
    for p in curve {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            p.step,
            fmt_f64(p.mean_eval_return_raw),
            fmt_f64(p.mean_eval_return_shaped),
            fmt_f64(p.jerk_std),
            fmt_f64(p.switching_count)
        );
    }
    s
}

pub fn runs_csv(runs: &[RunRecord]) -> String {
    let mut s = String::from("order,seed,lambda,status,return_raw,return_shaped,jerk_std,total_variation,switching_count\n");
    for r in runs {
        let status = match r.status {
            RunStatus::Completed => "completed",
            RunStatus::Diverged(_) => "diverged",
        };
        let m = r.metrics.map(|m| {
            [m.return_raw, m.return_shaped, m.jerk_std, m.total_variation, m.switching_count]
                .map(fmt_f64)
                .join(",")
        });
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.order,
            r.seed,
            fmt_f64(r.lambda),
            status,
            m.unwrap_or_else(|| ",,,,".into())
        );
    }
    s
}

/// Directory holding one run's curve, checkpoint and evaluation trajectories.
pub fn run_dir(out_dir: &Path, order: u8, seed: u64) -> PathBuf {
    out_dir.join("runs").join(format!("order{order}_seed{seed}"))
}

fn write_artifacts(config: &ExperimentConfig, output: &ExperimentOutput, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join("config.toml"), &config.to_toml()?)?;
    for run in &output.runs {
        let Some(out) = &run.output else { continue };
        let rd = run_dir(dir, run.order, run.seed);
        create_dir(&rd)?;
        write_file(&rd.join("curve.csv"), &curve_csv(&out.curve))?;
        save_checkpoint(&out.checkpoint, rd.join("checkpoint.txt"))?;
        for (k, ep) in out.eval_episodes.iter().enumerate() {
            save_trajectory(&ep.trajectory, rd.join(format!("eval{k}.traj")))?;
        }
    }
    write_file(&dir.join("runs.csv"), &runs_csv(&output.runs))?;
    write_file(&dir.join("results.csv"), &output.table.to_csv())?;
    let manifest = serde_json::to_string_pretty(&output.manifest).map_err(|e| Error::Invariant(e.to_string()))?;
    write_file(&dir.join("manifest.json"), &(manifest + "\n"))?;
    Ok(())
}

/// Writes `order, mean raw return, smoothness score 1/(1 + jerk_std), jerk_std,
/// switching count` per order; needs at least two completed orders.
pub fn emit_tradeoff_data(table: &ResultsTable, path: impl AsRef<Path>) -> Result<()> {
    let rows: Vec<&ResultsRow> = table.rows.iter().filter(|r| r.return_raw.is_some() && r.jerk_std.is_some()).collect();
    if rows.len() < 2 {
        return Err(Error::InsufficientSamples {
            what: "trade-off data (completed penalty orders)",
            needed: 2,
            got: rows.len(),
        });
    }
    let mut s = String::from("order,return_raw_mean,smoothness_score,jerk_std_mean,switching_count_mean\n");
    for r in rows {
        let jerk = r.jerk_std.expect("filtered").mean;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.order,
            fmt_f64(r.return_raw.expect("filtered").mean),
            fmt_f64(1.0 / (1.0 + jerk)),
            fmt_f64(jerk),
            r.switching_count.map(|s| fmt_f64(s.mean)).unwrap_or_default()
        );
    }
    write_file(path.as_ref(), &s)
}
