//! The complete in-memory state: workers, image pool, chains, stories, votes.
//!
//! State changes only through [`Platform::apply`], which consumes one
//! [`EventRecord`]. [`Platform::decide`] validates a [`Command`] against the
//! current state and returns the event it would produce, so a single writer can
//! persist the event before applying it.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::chain::{ChainFilter, ChainOutcome, ChainProposal, ChainStore, ImageChain, ImageOrigin, ImageRecord};
use crate::error::{Error, Result};
use crate::event::{Command, Decision, EventKind, EventRecord, Outcome};
use crate::ids::{canonical_chain_id, sha256_hex, ChainId, ImageId, StoryId, WorkerId};
use crate::story::{StoryOrdering, StoryStore, StoryText};
use crate::voting::{rank_leaderboard, LeaderboardEntry, LeaderboardWeights, VoteBook, VoteRecord, WorkerActivity};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WorkerProfile {
    pub worker_id: WorkerId,
    pub display_name: String,
    #[serde(skip)]
    pub token_digest: String,
    pub registered_at: DateTime<Utc>,
}

/// Digest under which a bearer token is recorded.
pub fn token_digest(token: &str) -> String {
    sha256_hex(token.as_bytes())
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Platform {
    workers: Vec<WorkerProfile>,
    token_index: HashMap<String, WorkerId>,
    activity: Vec<WorkerActivity>,
    chains: ChainStore,
    stories: StoryStore,
    votes: VoteBook,
    last_seq: u64,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidEvent(msg.into())
}

impl Platform {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds state from a complete record sequence.
    pub fn replay<'a>(records: impl IntoIterator<Item = &'a EventRecord>) -> Result<Self> {
        let mut platform = Self::new();
        for rec in records {
            platform.apply(rec)?;
        }
        Ok(platform)
    }

    /// Sequence number of the last applied event (0 when empty).
    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    // ---- reads ----

    pub fn workers(&self) -> &[WorkerProfile] {
        &self.workers
    }

    pub fn worker(&self, id: WorkerId) -> Option<&WorkerProfile> {
        let idx = usize::try_from(id.get()).ok()?.checked_sub(1)?;
        self.workers.get(idx)
    }

    pub fn worker_by_token_digest(&self, digest: &str) -> Option<&WorkerProfile> {
        self.token_index.get(digest).and_then(|&id| self.worker(id))
    }

    pub fn activity(&self, id: WorkerId) -> Option<&WorkerActivity> {
        let idx = usize::try_from(id.get()).ok()?.checked_sub(1)?;
        self.activity.get(idx)
    }

    pub fn chains(&self) -> &ChainStore {
        &self.chains
    }

    pub fn stories(&self) -> &StoryStore {
        &self.stories
    }

    pub fn votes(&self) -> &VoteBook {
        &self.votes
    }

    pub fn image(&self, id: &ImageId) -> Option<&ImageRecord> {
        self.chains.image(id)
    }

    pub fn chain(&self, id: &ChainId) -> Option<&ImageChain> {
        self.chains.chain(id)
    }

    pub fn list_chains(&self, filter: &ChainFilter) -> Vec<&ImageChain> {
        self.chains.list_chains(filter)
    }

    pub fn story(&self, id: StoryId) -> Option<&StoryText> {
        self.stories.get(id)
    }

    pub fn story_count(&self) -> usize {
        self.stories.count()
    }

    pub fn list_stories(&self, chain: &ChainId, ordering: StoryOrdering) -> Result<Vec<&StoryText>> {
        self.require_chain(chain)?;
        Ok(self.stories.list(chain, ordering, |s| self.votes.tally(s)))
    }

    pub fn story_vote_tally(&self, story: StoryId) -> Result<u64> {
        self.stories.get(story).ok_or(Error::UnknownStory(story))?;
        Ok(self.votes.tally(story))
    }

    /// Implicit (duplicate-creation) votes plus active story votes on the chain.
    pub fn chain_score(&self, chain: &ChainId) -> Result<u64> {
        let c = self.require_chain(chain)?;
        Ok(c.implicit_votes
            + self
                .stories
                .on_chain(chain)
                .map(|s| self.votes.tally(s.story_id))
                .sum::<u64>())
    }

    /// The chain's story with the most active votes, earliest first on ties.
    pub fn best_story(&self, chain: &ChainId) -> Option<&StoryText> {
        self.stories
            .list(chain, StoryOrdering::ByVotesDesc, |s| self.votes.tally(s))
            .into_iter()
            .next()
    }

    pub fn leaderboard(&self, k: usize, weights: &LeaderboardWeights) -> Vec<LeaderboardEntry> {
        rank_leaderboard(
            self.workers
                .iter()
                .zip(&self.activity)
                .map(|(w, a)| (w.worker_id, a.score(weights))),
            k,
        )
    }

    fn require_worker(&self, id: WorkerId) -> Result<&WorkerProfile> {
        self.worker(id).ok_or(Error::UnknownWorker(id))
    }

    fn require_chain(&self, id: &ChainId) -> Result<&ImageChain> {
        self.chains.chain(id).ok_or_else(|| Error::UnknownChain(id.clone()))
    }

    // ---- decide ----

    /// Validates `cmd` against the current state without changing it.
    pub fn decide(&self, cmd: &Command) -> Result<Decision> {
        match cmd {
            Command::RegisterWorker {
                display_name,
                token_digest,
            } => {
                if display_name.trim().is_empty() {
                    return Err(Error::EmptyDisplayName);
                }
                if self.token_index.contains_key(token_digest) {
                    return Err(invalid("token already issued"));
                }
                Ok(Decision::Append(EventKind::RegisterWorker {
                    worker_id: WorkerId::new(self.workers.len() as u64 + 1),
                    display_name: display_name.clone(),
                    token_digest: token_digest.clone(),
                }))
            }
            Command::AddImage {
                image_id,
                description,
                worker,
                origin,
            } => {
                if description.trim().is_empty() {
                    return Err(Error::EmptyDescription);
                }
                self.require_worker(*worker)?;
                if let Some(existing) = self.chains.image(image_id) {
                    return Ok(Decision::Unchanged(Outcome::Image {
                        image: existing.clone(),
                        created: false,
                    }));
                }
                Ok(Decision::Append(EventKind::AddImage {
                    image_id: image_id.clone(),
                    description: description.clone(),
                    uploader: *worker,
                    origin: *origin,
                }))
            }
            Command::StartChain { base, worker } => {
                self.require_worker(*worker)?;
                self.dedup(self.chains.propose_start(base, *worker)?, *worker)
            }
            Command::ExtendChain {
                parent,
                appended,
                worker,
            } => {
                self.require_worker(*worker)?;
                self.dedup(self.chains.propose_extend(parent, appended, *worker)?, *worker)
            }
            Command::BranchChain {
                parent,
                prefix_len,
                appended,
                worker,
            } => {
                self.require_worker(*worker)?;
                self.dedup(
                    self.chains.propose_branch(parent, *prefix_len, appended, *worker)?,
                    *worker,
                )
            }
            Command::MergeChains { first, second, worker } => {
                self.require_worker(*worker)?;
                self.dedup(self.chains.propose_merge(first, second, *worker)?, *worker)
            }
            Command::SubmitStory {
                chain,
                worker,
                body,
                derived_from,
            } => {
                self.require_worker(*worker)?;
                self.require_chain(chain)?;
                let draft = self.stories.draft(chain, *worker, body, *derived_from)?;
                Ok(Decision::Append(EventKind::SubmitStory {
                    story_id: draft.story_id,
                    chain_id: chain.clone(),
                    author: *worker,
                    version: draft.version,
                    body: body.clone(),
                    derived_from: *derived_from,
                }))
            }
            Command::CastVote { story, worker } => {
                self.require_worker(*worker)?;
                let story = self.stories.get(*story).ok_or(Error::UnknownStory(*story))?;
                if let Some(active) = self.votes.active_vote(*worker, &story.chain_id) {
                    if active.story_id == story.story_id {
                        return Ok(Decision::Unchanged(Outcome::Vote(active.clone())));
                    }
                }
                Ok(Decision::Append(EventKind::CastVote {
                    voter: *worker,
                    chain_id: story.chain_id.clone(),
                    story_id: story.story_id,
                }))
            }
        }
    }

    fn dedup(&self, proposal: ChainProposal, worker: WorkerId) -> Result<Decision> {
        match self.chains.find_sequence(&proposal.chain_id, &proposal.sequence)? {
            Some(existing) => Ok(Decision::Append(EventKind::ImplicitVote {
                chain_id: existing.chain_id.clone(),
                worker,
            })),
            None => Ok(Decision::Append(EventKind::CreateChain {
                chain_id: proposal.chain_id,
                sequence: proposal.sequence,
                creator: worker,
                contributors: proposal.contributors,
                provenance: proposal.provenance,
            })),
        }
    }

    // ---- apply ----

    /// Applies one event. Every event is re-validated, so a log that was not
    /// produced by `decide` on the same prefix is rejected.
    pub fn apply(&mut self, rec: &EventRecord) -> Result<Outcome> {
        if rec.seq != self.last_seq + 1 {
            return Err(invalid(format!(
                "sequence gap: expected {}, found {}",
                self.last_seq + 1,
                rec.seq
            )));
        }
        let outcome = self.apply_kind(&rec.kind, rec.at)?;
        self.last_seq = rec.seq;
        Ok(outcome)
    }

    fn activity_mut(&mut self, id: WorkerId) -> &mut WorkerActivity {
        &mut self.activity[id.get() as usize - 1]
    }

    fn apply_kind(&mut self, kind: &EventKind, at: DateTime<Utc>) -> Result<Outcome> {
        match kind {
            EventKind::RegisterWorker {
                worker_id,
                display_name,
                token_digest,
            } => {
                if worker_id.get() != self.workers.len() as u64 + 1 {
                    return Err(invalid(format!("unexpected worker id {worker_id}")));
                }
                if display_name.trim().is_empty() || self.token_index.contains_key(token_digest) {
                    return Err(invalid("bad worker registration"));
                }
                let profile = WorkerProfile {
                    worker_id: *worker_id,
                    display_name: display_name.clone(),
                    token_digest: token_digest.clone(),
                    registered_at: at,
                };
                self.token_index.insert(token_digest.clone(), *worker_id);
                self.workers.push(profile.clone());
                self.activity.push(WorkerActivity::default());
                Ok(Outcome::Worker(profile))
            }
            EventKind::AddImage {
                image_id,
                description,
                uploader,
                origin,
            } => {
                self.require_worker(*uploader)?;
                if description.trim().is_empty() || self.chains.image(image_id).is_some() {
                    return Err(invalid(format!("bad image record {image_id}")));
                }
                let image = ImageRecord {
                    image_id: image_id.clone(),
                    description: description.clone(),
                    uploader: *uploader,
                    uploaded_at: at,
                    origin: *origin,
                };
                self.chains.insert_image(image.clone());
                if *origin == ImageOrigin::WorkerUpload {
                    self.activity_mut(*uploader).images_uploaded += 1;
                }
                Ok(Outcome::Image { image, created: true })
            }
            EventKind::CreateChain {
                chain_id,
                sequence,
                creator,
                contributors,
                provenance,
            } => {
                self.require_worker(*creator)?;
                if &canonical_chain_id(sequence)? != chain_id {
                    return Err(invalid(format!("chain id mismatch for {chain_id}")));
                }
                if let Some(missing) = sequence.iter().find(|i| self.chains.image(i).is_none()) {
                    return Err(Error::UnknownImage(missing.clone()));
                }
                if self.chains.find_sequence(chain_id, sequence)?.is_some() {
                    return Err(invalid(format!("duplicate chain {chain_id}")));
                }
                let chain = ImageChain {
                    chain_id: chain_id.clone(),
                    sequence: sequence.clone(),
                    creator: *creator,
                    contributors: contributors.clone(),
                    implicit_votes: 0,
                    created_at: at,
                    provenance: provenance.clone(),
                };
                self.chains.insert_chain(chain.clone());
                self.activity_mut(*creator).chains_created += 1;
                Ok(Outcome::Chain(ChainOutcome::Created { chain }))
            }
            EventKind::ImplicitVote { chain_id, worker } => {
                self.require_worker(*worker)?;
                let implicit_votes = self.chains.add_implicit_vote(chain_id)?;
                Ok(Outcome::Chain(ChainOutcome::DuplicateVoted {
                    chain_id: chain_id.clone(),
                    implicit_votes,
                }))
            }
            EventKind::SubmitStory {
                story_id,
                chain_id,
                author,
                version,
                body,
                derived_from,
            } => {
                self.require_worker(*author)?;
                self.require_chain(chain_id)?;
                let draft = self.stories.draft(chain_id, *author, body, *derived_from)?;
                if draft.story_id != *story_id || draft.version != *version {
                    return Err(invalid(format!("story {story_id} v{version} out of order")));
                }
                let story = StoryText {
                    story_id: *story_id,
                    chain_id: chain_id.clone(),
                    author: *author,
                    version: *version,
                    body: body.clone(),
                    derived_from: *derived_from,
                    created_at: at,
                };
                self.stories.insert(story.clone());
                self.activity_mut(*author).stories_submitted += 1;
                Ok(Outcome::Story(story))
            }
            EventKind::CastVote {
                voter,
                chain_id,
                story_id,
            } => {
                self.require_worker(*voter)?;
                let story = self.stories.get(*story_id).ok_or(Error::UnknownStory(*story_id))?;
                if &story.chain_id != chain_id {
                    return Err(invalid(format!("vote for {story_id} names the wrong chain")));
                }
                let author = story.author;
                let record = VoteRecord {
                    voter: *voter,
                    chain_id: chain_id.clone(),
                    story_id: *story_id,
                    cast_at: at,
                    superseded: false,
                };
                if let Some(previous) = self.votes.cast(record.clone()) {
                    let prev_author = self.stories.get(previous).expect("voted story exists").author;
                    self.activity_mut(prev_author).votes_received -= 1;
                }
                self.activity_mut(author).votes_received += 1;
                Ok(Outcome::Vote(record))
            }
        }
    }
}
