//! Stage-by-stage and full-experiment drivers for `ppmi-lowrank`.

pub mod cache;
pub mod commands;
pub mod config;
pub mod logging;
pub mod pipeline;
pub mod report;
pub mod stages;

pub use commands::{run, Cli, Outcome};
pub use config::ExperimentConfig;
pub use pipeline::{run_pipeline, PipelineOutput};
pub use report::run_anova;
