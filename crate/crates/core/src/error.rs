use thiserror::Error;

use crate::ids::{ChainId, ImageId, StoryId, WorkerId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image blob is empty")]
    EmptyBlob,
    #[error("image description is empty")]
    EmptyDescription,
    #[error("worker display name is empty")]
    EmptyDisplayName,
    #[error("unknown worker {0}")]
    UnknownWorker(WorkerId),
    #[error("image sequence is empty")]
    EmptySequence,
    #[error("unknown image {0}")]
    UnknownImage(ImageId),
    #[error("unknown chain {0}")]
    UnknownChain(ChainId),
    #[error("extension adds no images")]
    EmptyExtension,
    #[error("prefix length {prefix_len} outside 1..={parent_len}")]
    PrefixOutOfRange { prefix_len: usize, parent_len: usize },
    #[error("story body is empty")]
    EmptyBody,
    #[error("story body is {len} bytes, limit is {limit}")]
    BodyTooLong { len: usize, limit: usize },
    #[error("story {0} belongs to a different chain")]
    CrossChainDerivation(StoryId),
    #[error("unknown story {0}")]
    UnknownStory(StoryId),
    #[error("malformed id: {0}")]
    MalformedId(String),
    #[error("chain id collision between distinct sequences at {0}")]
    HashCollision(ChainId),
    /// An event that cannot be applied to the current state.
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    /// The event log failed structural or semantic validation.
    #[error("corrupt event log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, used in API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyBlob => "EMPTY_BLOB",
            Error::EmptyDescription => "EMPTY_DESCRIPTION",
            Error::EmptyDisplayName => "EMPTY_DISPLAY_NAME",
            Error::UnknownWorker(_) => "UNKNOWN_WORKER",
            Error::EmptySequence => "EMPTY_SEQUENCE",
            Error::UnknownImage(_) => "UNKNOWN_IMAGE",
            Error::UnknownChain(_) => "UNKNOWN_CHAIN",
            Error::EmptyExtension => "EMPTY_EXTENSION",
            Error::PrefixOutOfRange { .. } => "PREFIX_OUT_OF_RANGE",
            Error::EmptyBody => "EMPTY_BODY",
            Error::BodyTooLong { .. } => "BODY_TOO_LONG",
            Error::CrossChainDerivation(_) => "CROSS_CHAIN_DERIVATION",
            Error::UnknownStory(_) => "UNKNOWN_STORY",
            Error::MalformedId(_) => "MALFORMED_ID",
            Error::HashCollision(_) => "HASH_COLLISION",
            Error::InvalidEvent(_) => "INVALID_EVENT",
            Error::CorruptLog { .. } => "CORRUPT_LOG",
            Error::Io(_) => "IO",
        }
    }

    pub(crate) fn corrupt(line: usize, reason: impl Into<String>) -> Self {
        Error::CorruptLog {
            line,
            reason: reason.into(),
        }
    }
}
