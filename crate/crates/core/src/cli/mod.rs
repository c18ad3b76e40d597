//! Batch experiment runner behind the `svde` binary.
//!
//! A run is `command + config file -> CSV`. The config is a flat list of
//! `key = value` lines with `#` comments; lists are comma separated. Keys
//! shared by all commands:
//!
//! ```text
//! kernel  = cos_x        # preset, see `presets`
//! T       = 0.5
//! N       = 1000
//! d       = 1
//! x       = 0            # one value (broadcast) or d values
//! seed    = 0
//! n_paths = 10000
//! ```
//!
//! Every row carries the run context plus `metric, value, std_error, status`.
//! `status` is PASS or FAIL for rows that are checks and empty otherwise.

mod commands;
pub mod config;
pub mod csv;
pub mod presets;

use thiserror::Error;

use crate::error::SvdeError;
use crate::montecarlo::with_threads;

pub use config::{Command, ExperimentConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Svde(#[from] SvdeError),

    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 2 for anything the user can fix in the config, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Svde(SvdeError::PicardNotConverged { .. } | SvdeError::NonFinite { .. }) => 1,
            CliError::Svde(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

/// Exit code for a failed `--assert` check.
pub const ASSERTION_FAILED: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: String,
    /// Some check row reported FAIL.
    pub failed: bool,
}

/// Runs `config` on `threads` workers (0 = one per core).
pub fn run(config: &ExperimentConfig, threads: usize) -> Result<RunOutput, CliError> {
    let (ctx, rows) = with_threads(threads, || commands::dispatch(config))?;
    Ok(RunOutput {
        csv: csv::render(&ctx, &rows),
        failed: rows.iter().any(|r| r.status == Some(false)),
    })
}
