use thiserror::Error;

/// Errors produced by model construction, moment computation and the tail calculators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("no bound on |xi_i| available: {0}")]
    MissingDelta(String),
    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument out of range: {0}")]
    Range(String),
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures caused by problem size rather than bad input.
    pub fn is_unsupported_size(&self) -> bool {
        matches!(self, Error::UnsupportedSize(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
