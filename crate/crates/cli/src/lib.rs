//! Configuration, file emission and experiment dispatch for the `ptssh`
//! command-line tool.

pub mod config;
pub mod experiment;
pub mod export;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{paper_figures, BatchConfig, Command, ExperimentConfig, Format};
pub use experiment::{run_batch, run_experiment, BatchReport, ExperimentReport, Status};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "PTSSH_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "ptssh-out";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("computation failed: {0}")]
    Computation(String),
    #[error("output error: {0}")]
    Io(String),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Validation(_) => 1,
            ExperimentError::Computation(_) | ExperimentError::Io(_) => 2,
        }
    }
}

/// `--out` wins over the environment variable, which wins over the config.
pub fn resolve_out_dir(cli: Option<&Path>, env: Option<&str>, config: Option<&Path>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| config.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}
