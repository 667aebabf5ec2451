use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("user index {index} out of range 1..={users}")]
    UserOutOfRange { index: usize, users: usize },

    #[error("time index {index} outside modeled horizon 1..={horizon}")]
    TimeOutOfRange { index: usize, horizon: usize },

    #[error("subspace dimension {dimension} rejected: {reason}")]
    DimensionRejected { dimension: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty pilot position set")]
    EmptyPilotSet,

    #[error("{0} taps exceed {1} subcarriers")]
    TooManyTaps(usize, usize),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("trial rejected: {0}")]
    TrialRejected(String),

    #[error("quadrature did not converge (relative change {0:e})")]
    Quadrature(f64),

    #[error("codebook: {0}")]
    Codebook(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
