use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("legendre transform did not converge after {iterations} iterations (|nu| = {nu_norm})")]
    LegendreNonConvergence { iterations: usize, nu_norm: f64 },

    #[error("lattice cutoff R = {cutoff} too small: tail estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    LatticeCutoff {
        cutoff: usize,
        estimate: f64,
        tolerance: f64,
    },

    #[error("solver failure at t = {time}: {reason}")]
    SolverFailure { time: f64, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
