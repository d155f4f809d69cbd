//! Experiment runner: configuration, seeded training runs, sweeps,
//! optimizer comparisons, plateau studies and their on-disk reports.

pub mod config;
mod error;
pub mod experiment;
pub mod landscape;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::{compare_optimizers, run_experiment, sweep, train_command, ExperimentOutcome};
pub use report::{emit_report, ExperimentReport};
