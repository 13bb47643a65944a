//! Experiment configuration, CSV ingestion and report writing for the `datashare` binary.

pub mod app;
pub mod config;
pub mod error;
pub mod experiment;
pub mod ingest;

pub use config::{ExperimentConfig, StopMode};
pub use error::{CliError, IngestError};
pub use experiment::run_experiment;
pub use ingest::{ingest_csv, IngestOptions};
