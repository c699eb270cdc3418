//! Experiment driver: space generation, batch angle runs, comparisons and sweeps.

pub mod compare;
pub mod config;
pub mod demo;
pub mod error;
pub mod experiment;
pub mod output;
pub mod source;
pub mod sweeps;

pub use config::{ExperimentConfig, Method};
pub use error::CliError;
pub use experiment::{run, ResultRow, RunOutcome};
