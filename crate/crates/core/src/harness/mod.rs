//! Experiment orchestration: order sweeps, result tables, trade-off data and
//! DollHouse identification.

mod config;
mod experiment;
mod identify;
mod recompute;

pub use config::{config_hash, ppo_config_hash, ExperimentConfig};
pub use experiment::{
    curve_csv, emit_tradeoff_data, run_dir, run_experiment, runs_csv, ExperimentOutput, Manifest, ManifestRun,
    ResultsRow, ResultsTable, RunMetrics, RunRecord, RunStatus, Stat,
};
pub use identify::{
    identify_dollhouse, identify_from_logs, random_policy_logs, CoefficientRow, IdentifyConfig, IdentifyReport,
};
pub use recompute::{recompute_metrics, metrics_csv};
