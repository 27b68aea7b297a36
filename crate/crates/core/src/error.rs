use thiserror::Error;

use crate::delivery::SubfileId;

/// Errors produced by the library.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A system configuration field violates its invariant.
    #[error("invalid {field}: {message}")]
    InvalidConfig {
        field: &'static str,
        message: String,
    },

    /// A demand vector or demand class is malformed.
    #[error("invalid demand: {0}")]
    InvalidDemand(String),

    /// An exact integer computation left the representable range.
    #[error("integer overflow computing {0}")]
    Overflow(String),

    /// A request exceeds a hard enumeration or simulation limit.
    #[error("{what} = {requested} exceeds the limit of {limit}")]
    LimitExceeded {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    /// File bit length cannot be split into equal subfiles.
    #[error("file length {bits} bits is not a multiple of {multiple}")]
    Divisibility { bits: usize, multiple: usize },

    /// A packet needed by an XOR reconstruction has not been delivered.
    #[error("packet for target set {target} is missing (dropped set {dropped})")]
    MissingPacket { target: String, dropped: String },

    /// A user could not recover one of the subfiles it needs.
    #[error("user {user} cannot recover subfile {subfile}")]
    Undecodable { user: usize, subfile: SubfileId },

    /// A reconstruction request violates its precondition.
    #[error("invalid reconstruction: {0}")]
    InvalidReconstruction(String),

    /// Two independent evaluations of the same quantity disagree.
    #[error("consistency check failed: {0}")]
    Inconsistent(String),

    /// A run specification could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A run specification is missing a required key or is otherwise invalid.
    #[error("{0}")]
    Spec(String),

    /// An error raised while evaluating one point of a sweep.
    #[error("at M = {memory}: {source}")]
    AtMemory { memory: f64, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether the error comes from a failed consistency or verification check
    /// rather than from invalid input.
    pub fn is_verification_failure(&self) -> bool {
        match self {
            Error::Inconsistent(_) | Error::Undecodable { .. } | Error::MissingPacket { .. } => true,
            Error::AtMemory { source, .. } => source.is_verification_failure(),
            _ => false,
        }
    }

    pub(crate) fn config(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            message: message.into(),
        }
    }
}
