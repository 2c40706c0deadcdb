use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid initial condition: {0}")]
    InitialCondition(String),

    #[error("invalid time stepping request: {0}")]
    TimeStep(String),

    /// A factorization that the model invariants guarantee to succeed failed.
    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("eigenvalue iteration did not converge at index {index}")]
    NoConvergence { index: usize },

    #[error("eigenpair {index} failed verification: residual {residual:e} exceeds {bound:e}")]
    Residual {
        index: usize,
        residual: f64,
        bound: f64,
    },

    #[error("invalid decay data: {0}")]
    DecayData(String),

    #[error("decay bound not asserted at t = {t} (certificate time T = {horizon})")]
    BoundDomain { t: f64, horizon: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
