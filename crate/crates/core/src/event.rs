//! Mutations: the commands callers issue and the events the log records.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::chain::{ChainOutcome, ImageOrigin, ImageRecord, Provenance};
use crate::ids::{ChainId, ImageId, StoryId, WorkerId};
use crate::platform::WorkerProfile;
use crate::story::StoryText;
use crate::voting::VoteRecord;

/// One line of the event log. The full store state is a pure function of the
/// record sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventKind {
    RegisterWorker {
        worker_id: WorkerId,
        display_name: String,
        /// SHA-256 of the bearer token; the token itself is never stored.
        token_digest: String,
    },
    AddImage {
        image_id: ImageId,
        description: String,
        uploader: WorkerId,
        origin: ImageOrigin,
    },
    CreateChain {
        chain_id: ChainId,
        sequence: Vec<ImageId>,
        creator: WorkerId,
        contributors: BTreeSet<WorkerId>,
        provenance: Provenance,
    },
    ImplicitVote {
        chain_id: ChainId,
        worker: WorkerId,
    },
    SubmitStory {
        story_id: StoryId,
        chain_id: ChainId,
        author: WorkerId,
        version: u32,
        body: String,
        derived_from: Option<StoryId>,
    },
    CastVote {
        voter: WorkerId,
        chain_id: ChainId,
        story_id: StoryId,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::RegisterWorker { .. } => "RegisterWorker",
            EventKind::AddImage { .. } => "AddImage",
            EventKind::CreateChain { .. } => "CreateChain",
            EventKind::ImplicitVote { .. } => "ImplicitVote",
            EventKind::SubmitStory { .. } => "SubmitStory",
            EventKind::CastVote { .. } => "CastVote",
        }
    }
}

/// A requested mutation, already attributed to an authenticated worker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    RegisterWorker {
        display_name: String,
        token_digest: String,
    },
    /// The blob must already be in the blob store under `image_id`.
    AddImage {
        image_id: ImageId,
        description: String,
        worker: WorkerId,
        origin: ImageOrigin,
    },
    StartChain {
        base: ImageId,
        worker: WorkerId,
    },
    ExtendChain {
        parent: ChainId,
        appended: Vec<ImageId>,
        worker: WorkerId,
    },
    BranchChain {
        parent: ChainId,
        prefix_len: usize,
        appended: Vec<ImageId>,
        worker: WorkerId,
    },
    MergeChains {
        first: ChainId,
        second: ChainId,
        worker: WorkerId,
    },
    SubmitStory {
        chain: ChainId,
        worker: WorkerId,
        body: String,
        derived_from: Option<StoryId>,
    },
    CastVote {
        story: StoryId,
        worker: WorkerId,
    },
}

/// What a command did.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Worker(WorkerProfile),
    Image { image: ImageRecord, created: bool },
    Chain(ChainOutcome),
    Story(StoryText),
    Vote(VoteRecord),
}

/// Result of validating a command against the current state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decision {
    /// The command changes state and must be logged.
    Append(EventKind),
    /// Idempotent repeat; nothing to log.
    Unchanged(Outcome),
}
