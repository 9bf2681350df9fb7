use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaslovError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("assumption C violated: leading eigenvalue {mu1} is not separated from {mu2}")]
    AssumptionC { mu1: String, mu2: String },
    #[error("integration failed at x = {x}: {reason}")]
    Integration { x: f64, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("resolution limit reached: {0}")]
    Resolution(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("formula not applicable: {0}")]
    Inapplicable(String),
    #[error("wave construction failed: {0}")]
    Wave(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, MaslovError>;

impl From<std::io::Error> for MaslovError {
    fn from(e: std::io::Error) -> Self {
        MaslovError::Io(e.to_string())
    }
}
