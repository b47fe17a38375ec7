//! Collaborative story writing over chains of images.
//!
//! Workers share an image pool, link images into ordered chains, write
//! versioned stories against chains and vote for them. Re-creating a chain
//! that already exists counts as a vote for it. All state is derived from an
//! append-only event log.

pub mod analytics;
pub mod blob;
pub mod chain;
pub mod clock;
pub mod error;
pub mod event;
pub mod fixture;
pub mod ids;
pub mod log;
pub mod platform;
pub mod recommend;
pub mod store;
pub mod story;
pub mod voting;

pub use chain::{ChainFilter, ChainOutcome, ImageChain, ImageOrigin, ImageRecord, Provenance};
pub use error::{Error, Result};
pub use event::{Command, EventKind, EventRecord, Outcome};
pub use ids::{canonical_chain_id, ChainId, ImageId, StoryId, WorkerId};
pub use platform::{Platform, WorkerProfile};
pub use store::Store;
pub use story::{StoryOrdering, StoryText};
pub use voting::{LeaderboardEntry, LeaderboardWeights, VoteRecord};
