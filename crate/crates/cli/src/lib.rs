//! Experiment runner for the `rpreg` regressor: INI configuration, plain-text
//! datasets, grid sweeps, and CSV/markdown result tables.

pub mod config;
pub mod dataset;
pub mod error;
pub mod runner;

pub use config::{ExperimentConfig, PartitionerKind};
pub use dataset::{load_dataset, save_dataset};
pub use error::{CliError, Result};
pub use runner::{run_experiment, GridPoint, ResultRow};
