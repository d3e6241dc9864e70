//! Measurement pipeline for television news transcripts: segmentation,
//! two-layer topic classification, leave-out polarization, topic-selection
//! divergence and audience consumption metrics.

pub mod annotation;
pub mod classify;
pub mod corpus;
pub mod error;
pub mod exec;
pub mod fixture;
pub mod metrics;
pub mod pipeline;
pub mod polarize;
pub mod weaksup;
pub mod window;

pub use error::{Error, Result};
pub use exec::Exec;
