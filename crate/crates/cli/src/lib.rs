// SPDX-License-Identifier: Apache-2.0

//! Seeded experiment runner: config parsing, Monte Carlo sweeps, CSV and
//! manifest output.

pub mod config;
pub mod experiments;
pub mod invariants;
pub mod manifest;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{parse_config, ConfigError, ExperimentConfig, ExperimentKind};
pub use experiments::{compute, run_experiment, DecayCurve, Outputs, RunOptions, RunOutcome};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: already exists (pass --force to overwrite)", .0.display())]
    Collision(PathBuf),
    #[error("schedule {}: {source}", .path.display())]
    Schedule {
        path: PathBuf,
        #[source]
        source: centralspin::seqlang::ParseError,
    },
    #[error("simulation failed: {0}")]
    Simulation(#[from] centralspin::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}
