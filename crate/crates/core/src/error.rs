use thiserror::Error;

/// Errors raised anywhere in the fitting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (dimension mismatch, bad shapes).
    #[error("input error: {0}")]
    Input(String),
    /// A parameter outside the support of a distribution.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid hyperparameter or schedule configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Data that cannot be parsed or fails validation.
    #[error("data error: {0}")]
    Data(String),
    /// Data-dependent calibration failed (e.g. constant response).
    #[error("calibration error: {0}")]
    Calibration(String),
    /// A kernel was asked to move from an invalid state.
    #[error("state error: {0}")]
    State(String),
    /// A sampling kernel failed to terminate.
    #[error("kernel error: {0}")]
    Kernel(String),
    /// The chain produced non-finite values.
    #[error("numerical abort at sweep {sweep}: {message}")]
    Numerical { sweep: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
