use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("generator is not weakly irreducible: {0}")]
    Irreducibility(String),
    #[error("invalid generator matrix: {0}")]
    Generator(String),
    #[error("ergodicity condition violated: {0}")]
    Ergodicity(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("rate fit error: {0}")]
    Fit(String),
    #[error("condition check failed: {0}")]
    Condition(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Whether the error reports a violated model assumption rather than bad input.
    pub fn is_condition(&self) -> bool {
        matches!(self, Error::Condition(_) | Error::Ergodicity(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
