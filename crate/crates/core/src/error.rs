use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0} (only 2 and 4 are supported)")]
    UnsupportedDimension(usize),

    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not a projector (deviation {0:.3e})")]
    NotProjector(f64),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("Bloch vector outside the unit ball: |r| = {0}")]
    OutsideBall(f64),

    #[error("zero-probability outcome (probability {0:.3e})")]
    ZeroProbability(f64),

    #[error("non-finite value encountered at step {step}: {what}")]
    NonFinite { step: usize, what: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trajectory aborted at t = {t}: {reason}")]
    TrajectoryAborted { t: f64, reason: String },

    #[error("step size rejected: {0}")]
    StepRejected(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
