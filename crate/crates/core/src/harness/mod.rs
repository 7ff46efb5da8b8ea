//! Experiment runners, metrics, configuration and persistence.

mod batch;
mod closed_loop;
mod config;
mod identify;
mod output;
mod record;
pub mod seeds;
mod summary;

pub use batch::{map_runs, map_runs_sequential, parse_seed_range, run_seeds};
pub use closed_loop::{run_closed_loop, run_closed_loop_with, ClosedLoopRun, ControlPolicy};
pub use config::{
    EstimatorSettings, ExperimentConfig, NoiseConfig, NoiseKind, PlantConfig, ThresholdSpec,
};
pub use identify::{
    run_identification, IdentificationCheckpoint, IdentificationReport, InputPolicy,
    IDENTIFICATION_CHECKPOINTS,
};
pub use output::{write_run, RunSummary};
pub use record::{read_records, read_records_csv, write_records, write_records_csv, StepRecord};
pub use summary::{regret_ratio, summarize, window_mse, Summary, TrackingCheckpoint, CHECKPOINTS, REGRET_DELTA};

/// Closed-loop runs log `lambda_min` once every this many steps.
pub const LAMBDA_SAMPLE_EVERY: usize = 100;
