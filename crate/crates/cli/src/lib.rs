//! Experiment harness for across-groups similarity learning: reproducible
//! synthetic, real-data and adversarial runs, and the property suites.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod suites;

pub use config::{ExperimentConfig, Mode, Seeds};
pub use error::{CliError, CliResult};
