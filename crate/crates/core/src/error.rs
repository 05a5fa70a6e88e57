use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the monitoring toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters: degree out of range, unknown system name, bad tau...
    #[error("configuration error: {0}")]
    Config(String),

    #[error("stencil too short: need {needed} samples, got {got}")]
    StencilLength { needed: usize, got: usize },

    /// Non-finite values, dimension mismatches, misaligned grids.
    #[error("data error: {0}")]
    Data(String),

    /// A sample arrived off the uniform sampling grid.
    #[error("sampling error: expected t = {expected}, got t = {got}")]
    Sampling { expected: f64, got: f64 },

    #[error("simulation diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    #[error("{path}, line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// True for errors caused by bad user input rather than runtime failures.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
