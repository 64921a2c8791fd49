//! Experiment orchestration behind the `mskinetic` binary.

pub mod commands;
pub mod config;
pub mod manifest;

use mskinetic::KineticError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Kinetic {
        context: String,
        #[source]
        source: KineticError,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Exit code 2 for resolution aborts, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Kinetic { source, .. } if is_resolution(source) => EXIT_RESOLUTION,
            _ => EXIT_FAIL,
        }
    }
}

pub fn is_resolution(e: &KineticError) -> bool {
    matches!(
        e,
        KineticError::ResolutionInsufficient { .. } | KineticError::UnresolvedAngularQuadrature { .. }
    )
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_RESOLUTION: i32 = 2;
