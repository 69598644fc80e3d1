//! Experiment runner for the FTRL expert-advice library: configuration,
//! runners that write CSV tables, and a small SVG line-chart writer.

pub mod config;
pub mod error;
pub mod experiments;
pub mod plot;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use experiments::{run, Outcome};
