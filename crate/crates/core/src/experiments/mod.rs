//! Experiment orchestration, reports, sweeps and canned reproductions.

mod config;
pub mod props;
mod report;
pub mod reproduce;
mod runner;
mod sweep;

pub use config::{
    ActiveGrid, AttackPlan, CsvSplit, DatasetSpec, ExperimentConfig, Method, ModelSpec, RoundSelection,
};
pub use report::{aggregate_rows, emit_raw, emit_report, format_table, RawRow, ResultRow, REPORT_COLUMNS};
pub use runner::{
    attack_from_logs, attack_targets, build_clients, index_results, initial_model, log_path, run_experiment,
    run_seed, train_only, write_artifacts, ExperimentOutput, MethodResult, SeedOutput, TargetContext,
};
pub use sweep::{sweep, Criterion, SweepResult};
