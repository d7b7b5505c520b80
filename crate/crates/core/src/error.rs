use thiserror::Error;

use crate::model::ValidationError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the simulator engines, the room service and the
/// statistics toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),

    #[error("sequence error: expected seq {expected}, got {got}")]
    Sequence { expected: u64, got: u64 },

    #[error("unknown {kind}: {id}")]
    UnknownReference { kind: &'static str, id: String },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("role error: {0}")]
    Role(String),

    #[error("mode error: {0}")]
    Mode(String),

    #[error("pairing error: {0}")]
    Pairing(PairingFailure),

    #[error("game error: {0}")]
    Game(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("io error: {0}")]
    Io(String),

    /// Message not valid in the connection's current state, such as an
    /// action before `hello`.
    #[error("session error: {0}")]
    Session(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingFailure {
    Unknown,
    Expired,
    Used,
}

impl std::fmt::Display for PairingFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PairingFailure::Unknown => "unknown pairing code",
            PairingFailure::Expired => "pairing code expired",
            PairingFailure::Used => "pairing code already used",
        })
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl Error {
    /// Stable machine-readable code, used in `error` wire messages and the
    /// C status mapping.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Sequence { .. } => "sequence",
            Error::UnknownReference { .. } => "unknown_reference",
            Error::Configuration(_) => "configuration",
            Error::Parse { .. } => "parse",
            Error::Role(_) => "role",
            Error::Mode(_) => "mode",
            Error::Pairing(PairingFailure::Unknown) => "pairing_unknown",
            Error::Pairing(PairingFailure::Expired) => "pairing_expired",
            Error::Pairing(PairingFailure::Used) => "pairing_used",
            Error::Game(_) => "game",
            Error::Degenerate(_) => "degenerate",
            Error::Input(_) => "input",
            Error::Io(_) => "io",
            Error::Session(_) => "session",
        }
    }

    pub(crate) fn unknown_image(id: impl Into<String>) -> Self {
        Error::UnknownReference {
            kind: "image",
            id: id.into(),
        }
    }
}
