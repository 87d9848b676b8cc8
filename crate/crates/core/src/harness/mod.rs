//! Experiment harness: configuration, the six experiment commands and their
//! reports.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{run_experiment, HarnessError};
pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use report::{Check, Comparison, Manifest, Outcome, RunReport};
