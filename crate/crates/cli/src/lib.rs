//! Experiment harness for the uplift toolkit: configuration, the studies
//! behind each subcommand, and CSV/SVG reporting.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use commands::{run, Command, VERSION};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
