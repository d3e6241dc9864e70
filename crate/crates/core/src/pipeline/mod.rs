//! Stage orchestration: configuration, cached artifacts, the stage runner
//! and figure-data exports.

pub mod artifact;
pub mod config;
pub mod export;
pub mod layers;
pub mod outputs;
pub mod stages;

pub use config::PipelineConfig;
pub use stages::{Outcome, Pipeline, Stage, ALL_STAGES};

#[cfg(test)]
mod tests;
