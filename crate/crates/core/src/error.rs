use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("degenerate cell: no sampled position reaches the {sensitivity_dbm} dBm sensitivity")]
    DegenerateCell { sensitivity_dbm: f64 },

    #[error("encode error: {0}")]
    Encode(String),

    #[error("decode error in element {element_id}: {reason}")]
    Decode { element_id: u8, reason: String },

    #[error("protocol violation: event {event} is not legal in phase {phase}")]
    ProtocolViolation { phase: String, event: String },

    #[error("internal simulator error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn decode(element_id: u8, reason: impl Into<String>) -> Self {
        Error::Decode {
            element_id,
            reason: reason.into(),
        }
    }

    pub(crate) fn violation(phase: impl std::fmt::Debug, event: impl std::fmt::Debug) -> Self {
        Error::ProtocolViolation {
            phase: format!("{phase:?}"),
            event: format!("{event:?}"),
        }
    }
}
