use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("term not found: {0}")]
    TermNotFound(String),

    #[error("term id out of range: {0}")]
    UnknownTermId(u32),

    #[error("clique id out of range: {0}")]
    UnknownCliqueId(u32),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate term (zero vector): {0}")]
    DegenerateTerm(String),

    #[error("subtracted term is linearly dependent on earlier ones: {0}")]
    DependentSubtrahend(String),

    #[error("unsupported store version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("corrupt store: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors that describe a damaged or incompatible store file.
    pub fn is_corruption(&self) -> bool {
        matches!(self, Error::Corrupt(_) | Error::Version { .. })
    }
}
