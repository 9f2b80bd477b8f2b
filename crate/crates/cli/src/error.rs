//! Application errors carrying the process exit-code contract:
//! 2 for configuration/prerequisite problems, 3 for numerical divergence.

use gridfno_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Bad configuration, unreadable/malformed artifact, or missing
    /// prerequisite. Exit code 2.
    #[error("{0}")]
    Config(String),
    /// Numerical divergence during simulation. Exit code 3 (partial
    /// output is still written where possible).
    #[error("numerical divergence: {0}")]
    Divergence(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Divergence(_) => 3,
        }
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NumericalBlowUp { .. } => AppError::Divergence(e.to_string()),
            other => AppError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
