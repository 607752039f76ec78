//! Library side of the `uge` command: experiment configs and the
//! generate, train, evaluate and sweep commands.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{evaluate_all, generate, sweep, train_all, RunOptions, SweepPoint};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
