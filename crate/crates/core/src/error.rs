use thiserror::Error;

use crate::estimation::RestartRecord;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the crate.
///
/// The variants are grouped by failure class so that callers (the CLI in
/// particular) can map them onto distinct exit statuses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("count {k} outside support {support}")]
    Support { k: u64, support: String },

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index {index} out of range: {reason}")]
    Index { index: usize, reason: String },

    #[error("{family} family has no auxiliary parameter")]
    UnsupportedFamily { family: &'static str },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("filter failed at t={t}: {reason}")]
    Filter { t: usize, reason: String },

    #[error("simulation failed at t={t}: {reason}")]
    Simulation { t: usize, reason: String },

    #[error("no restart converged ({} attempted)", log.len())]
    NonConvergence { log: Vec<RestartRecord> },

    #[error("non-finite Hessian entries at {indices:?}")]
    Numerical { indices: Vec<(usize, usize)> },

    #[error("inference error: {0}")]
    Inference(String),

    #[error("zero conditional variance at t={t}")]
    ZeroVariance { t: usize },

    #[error("autocorrelation undefined: {0}")]
    UndefinedAcf(String),

    #[error("line {line}: {reason}")]
    Ingest { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
