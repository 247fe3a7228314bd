//! Config-driven experiments: `run`, `reproduce`, `emit-plot-data` and
//! `validate-config`.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod reproduce;

pub use config::{
    metric_name, DataSource, EvaluationBlock, ExperimentConfig, Metric, NetworkBlock, OptimizerBlock, PosteriorBlock,
    SweepBlock,
};
pub use experiment::{
    checksum, execute, execute_with, posterior_stage, read_samples, run, run_config, thin, validate_config,
    write_samples, GridCache, Manifest, Metrics, MmdMetric, Outcome, PosteriorOutcome, RunOptions, SEED_ENV,
};
pub use plot::{emit_plot_data, FIGURES};
pub use reproduce::{pinned_config, pinned_source, reproduce, reproduce_config, Check, Report, EXPERIMENTS};

use crate::error::Error;

/// Process exit code for an error: 1 for configuration problems, 2 for
/// failures while running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Unknown(_) => 1,
        _ => 2,
    }
}
