use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid predimension spec: {0}")]
    InvalidSpec(String),
    #[error("oracle {oracle}: {msg}")]
    Oracle { oracle: String, msg: String },
    #[error("amalgamation failed: {0}")]
    Amalgam(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("unsupported spec: {0}")]
    UnsupportedSpec(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("non-unique minimal base: {0}")]
    Ambiguous(String),
    #[error("thrifty amalgamation failed: {0}")]
    ThriftyFailure(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
