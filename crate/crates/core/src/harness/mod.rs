//! Experiment orchestration: configs, the end-to-end pipeline, sweeps and
//! reports.

mod config;
mod pipeline;
mod report;
pub mod scenes;
mod stages;
mod sweep;

pub use config::{CleanConfig, HoldoutConfig, ObjectSpec, PipelineConfig, TrackConfig};
pub use pipeline::{run_pipeline, MetricsReport, PipelineError, PipelineOutput, Stage, StageTimings};
pub use report::{emit_report, plot_series, to_csv, to_json, ReportFormat, CSV_HEADER};
pub use stages::{stage_clean, stage_eval_geom, stage_eval_tex, stage_reconstruct, stage_render, stage_rig, stage_segment};
pub use sweep::{sweep_image_count, sweep_overlap, sweep_theta, SweepKind, SweepResult, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("I/O error: {0}")]
    Io(String),
}

/// Caps the global worker pool from `HULLBENCH_THREADS` when set. Results do
/// not depend on the worker count.
pub fn init_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var("HULLBENCH_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| ConfigError::Invalid(format!("HULLBENCH_THREADS='{v}' is not a count")))?;
    if n == 0 {
        return Err(ConfigError::Invalid("HULLBENCH_THREADS must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))
}
