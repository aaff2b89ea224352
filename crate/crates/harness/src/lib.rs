//! Monte-Carlo experiment harness: configuration, seeded parallel sweeps,
//! summaries, CSV output and KKT re-verification of saved runs.

pub mod audit;
pub mod config_file;
pub mod output;
pub mod sweep;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("malformed run file: {0}")]
    RunFile(String),

    #[error(transparent)]
    Solver(#[from] ris_core::Error),
}

impl HarnessError {
    /// Process exit code: 1 for configuration and input problems, 2 for
    /// solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Solver(_) => 2,
            _ => 1,
        }
    }
}
