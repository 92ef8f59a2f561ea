//! Configuration, dispatch and artifact writers behind the `capdrop` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use thiserror::Error;

pub use commands::{dispatch, Command, Options};
pub use config::{parse_config, ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(capdrop::Error),
    #[error("{0}")]
    Io(String),
    /// `verify` ran to completion but at least one check failed.
    #[error("{0} invariant check(s) failed")]
    Checks(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) | CliError::Validation(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) | CliError::Checks(_) => 3,
        }
    }
}

impl From<capdrop::Error> for CliError {
    fn from(e: capdrop::Error) -> Self {
        use capdrop::Error::*;
        match e {
            InvalidGrid(_) | Dimension { .. } | InvalidParams { .. } => CliError::Validation(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}
