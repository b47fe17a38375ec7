//! Explicit story votes, tallies and the leaderboard.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ids::{ChainId, StoryId, WorkerId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub voter: WorkerId,
    pub chain_id: ChainId,
    pub story_id: StoryId,
    pub cast_at: DateTime<Utc>,
    pub superseded: bool,
}

/// All vote records ever cast. A worker holds at most one active vote per chain.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VoteBook {
    records: Vec<VoteRecord>,
    active: HashMap<(WorkerId, ChainId), usize>,
    tallies: HashMap<StoryId, u64>,
}

impl VoteBook {
    pub fn records(&self) -> &[VoteRecord] {
        &self.records
    }

    pub fn tally(&self, story: StoryId) -> u64 {
        self.tallies.get(&story).copied().unwrap_or(0)
    }

    pub fn active_vote(&self, voter: WorkerId, chain: &ChainId) -> Option<&VoteRecord> {
        self.active.get(&(voter, chain.clone())).map(|&i| &self.records[i])
    }

    pub fn superseded_count(&self) -> usize {
        self.records.iter().filter(|r| r.superseded).count()
    }

    /// Records a new active vote, superseding the voter's previous vote on the
    /// same chain. Returns the story whose tally dropped, if any.
    pub(crate) fn cast(&mut self, record: VoteRecord) -> Option<StoryId> {
        debug_assert!(!record.superseded);
        let key = (record.voter, record.chain_id.clone());
        let previous = self.active.insert(key, self.records.len()).map(|i| {
            let old = &mut self.records[i];
            old.superseded = true;
            let story = old.story_id;
            *self.tallies.get_mut(&story).expect("active vote has a tally") -= 1;
            story
        });
        *self.tallies.entry(record.story_id).or_default() += 1;
        self.records.push(record);
        previous
    }
}

/// Per-activity leaderboard weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderboardWeights {
    pub image_uploaded: u64,
    pub chain_created: u64,
    pub story_submitted: u64,
    pub vote_received: u64,
}

impl Default for LeaderboardWeights {
    fn default() -> Self {
        Self {
            image_uploaded: 1,
            chain_created: 1,
            story_submitted: 1,
            vote_received: 2,
        }
    }
}

/// Running per-worker counts that feed the leaderboard.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerActivity {
    /// Worker uploads only; seeded base-pool images do not count.
    pub images_uploaded: u64,
    pub chains_created: u64,
    pub stories_submitted: u64,
    /// Active votes currently held by this worker's stories.
    pub votes_received: u64,
}

impl WorkerActivity {
    pub fn score(&self, w: &LeaderboardWeights) -> u64 {
        w.image_uploaded * self.images_uploaded
            + w.chain_created * self.chains_created
            + w.story_submitted * self.stories_submitted
            + w.vote_received * self.votes_received
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub worker: WorkerId,
    pub score: u64,
    pub rank: u32,
}

/// Ranks workers by score. `scores` must be in registration order; equal
/// scores keep that order and share the better (smaller) rank. Workers with
/// a zero score are left off the board.
pub fn rank_leaderboard(scores: impl IntoIterator<Item = (WorkerId, u64)>, k: usize) -> Vec<LeaderboardEntry> {
    let mut scored: Vec<(WorkerId, u64)> = scores.into_iter().filter(|(_, s)| *s > 0).collect();
    scored.sort_by_key(|s| std::cmp::Reverse(s.1));
    let mut entries: Vec<LeaderboardEntry> = Vec::with_capacity(k.min(scored.len()));
    for (pos, (worker, score)) in scored.into_iter().take(k).enumerate() {
        let rank = match entries.last() {
            Some(prev) if prev.score == score => prev.rank,
            _ => pos as u32 + 1,
        };
        entries.push(LeaderboardEntry { worker, score, rank });
    }
    entries
}
