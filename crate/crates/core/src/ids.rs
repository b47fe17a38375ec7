//! Identifiers and content hashing.
//!
//! Image ids are the lowercase hex SHA-256 of the blob bytes. Chain ids are the
//! SHA-256 of the ordered image ids joined with `.`; image ids are hex, so the
//! separator can never appear inside an element and the encoding is
//! unambiguous.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;

/// Name of the content hash recorded in the event log header.
pub const HASH_ALGORITHM: &str = "sha256";

const CHAIN_SEPARATOR: &str = ".";

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn is_lower_hex_digest(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

macro_rules! hash_id {
    ($name:ident, $what:literal) => {
        #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                if is_lower_hex_digest(s) {
                    Ok(Self(s.to_owned()))
                } else {
                    Err(Error::MalformedId(format!(concat!($what, " `{}`"), s)))
                }
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;

            fn try_from(s: String) -> Result<Self, Self::Error> {
                s.parse()
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }
    };
}

hash_id!(ImageId, "image id");
hash_id!(ChainId, "chain id");

impl ImageId {
    /// Content address of a blob. Identical bytes always give the same id.
    pub fn of_bytes(blob: &[u8]) -> Self {
        Self(sha256_hex(blob))
    }
}

impl ChainId {
    pub fn of_sequence(sequence: &[ImageId]) -> Result<Self, Error> {
        canonical_chain_id(sequence)
    }
}

/// Canonical identity of an ordered image sequence.
pub fn canonical_chain_id(sequence: &[ImageId]) -> Result<ChainId, Error> {
    if sequence.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut hasher = Sha256::new();
    for (i, id) in sequence.iter().enumerate() {
        if i > 0 {
            hasher.update(CHAIN_SEPARATOR.as_bytes());
        }
        hasher.update(id.as_str().as_bytes());
    }
    Ok(ChainId(hex::encode(hasher.finalize())))
}

macro_rules! seq_id {
    ($name:ident, $prefix:literal) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(u64);

        impl $name {
            pub fn new(n: u64) -> Self {
                Self(n)
            }

            pub fn get(self) -> u64 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.strip_prefix($prefix)
                    .filter(|rest| !rest.starts_with('+'))
                    .and_then(|rest| rest.parse::<u64>().ok())
                    .filter(|n| *n > 0)
                    .map(Self)
                    .ok_or_else(|| Error::MalformedId(s.to_owned()))
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;

            fn try_from(s: String) -> Result<Self, Self::Error> {
                s.parse()
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.to_string()
            }
        }
    };
}

seq_id!(WorkerId, "w");
seq_id!(StoryId, "s");
