//! File-based pipeline around `synergy-core`: input formats, stage
//! runner, run manifest and the synthetic world generator.

pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod stages;
pub mod synth;

pub use config::{Overrides, PipelineConfig};
pub use error::PipelineError;
pub use stages::{run_pipeline, run_stage, RunOptions, Stage};
