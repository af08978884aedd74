//! Batch experiment runner for the `randloop` engine.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod simulate;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use error::{CliError, CliResult};
