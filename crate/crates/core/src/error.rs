use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("inconsistent specification: {0}")]
    Inconsistent(String),
    #[error("zero-mass conditioning slice: {0}")]
    ZeroMass(String),
    #[error("support mismatch: {0}")]
    SupportMismatch(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}
