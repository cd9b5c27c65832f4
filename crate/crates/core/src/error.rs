use thiserror::Error;

/// Errors raised across the synthesis and verification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("polynomial is not strictly Hurwitz: {0}")]
    NotHurwitz(String),

    #[error("invalid frequency range: {0}")]
    InvalidFrequency(String),

    #[error("invalid bound: {0}")]
    InvalidBound(String),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NonHermitian(f64),

    #[error("singular system matrix at omega = {0}")]
    Singular(f64),

    #[error("closed loop is unstable: {0}")]
    Unstable(String),

    #[error("malformed problem: {0}")]
    Problem(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
