use thiserror::Error;

/// Errors raised by grid construction, operator building and the experiment
/// harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ancestor beyond root: cube at level {level} has no ancestor {steps} levels up")]
    AncestorBeyondRoot { level: u32, steps: u32 },

    #[error("cube at level {0} is at the finest level and has no children")]
    NoChildren(u32),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid shift: {0}")]
    InvalidShift(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
