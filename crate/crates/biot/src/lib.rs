//! Experiment runner for the four-field Biot solver: configuration files,
//! mesh files, CSV artifacts and parallel parameter sweeps.

pub mod config;
pub mod experiments;
pub mod meshio;
pub mod output;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use experiments::{run, Outcome, RunError, RunOptions};
