use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("measure not normalizable: {0}")]
    NonNormalizable(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("eigensolver failed: {0}")]
    SolverFailure(String),

    #[error("spectral hypothesis not met: {0}")]
    SpectrumGap(String),

    #[error("transport instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("operation unsupported at desk scale: {0}")]
    Unsupported(String),

    #[error("internal inconsistency: {0}")]
    Inconsistency(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
