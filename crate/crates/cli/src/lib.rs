//! Command-line front end and annotation service for the tvpolar pipeline.

pub mod app;
pub mod server;
