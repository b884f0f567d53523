use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no palindromic phase table for target angle {theta}")]
    UnsupportedTarget { theta: f64 },

    #[error("rotation axis undefined: propagator is within {tol:e} of ±I")]
    UndefinedAxis { tol: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit failed after {iterations} iterations: {reason}")]
    FitFailure { iterations: usize, reason: String },

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
