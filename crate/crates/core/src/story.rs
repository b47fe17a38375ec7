//! Versioned story texts attached to chains.
//!
//! Revising a story appends a new version; earlier versions stay readable.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ChainId, StoryId, WorkerId};

/// Upper bound on a story body, in bytes.
pub const MAX_BODY_BYTES: usize = 64 * 1024;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryText {
    pub story_id: StoryId,
    pub chain_id: ChainId,
    pub author: WorkerId,
    /// Per (chain, author), starting at 1.
    pub version: u32,
    pub body: String,
    pub derived_from: Option<StoryId>,
    pub created_at: DateTime<Utc>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoryOrdering {
    #[default]
    ByVotesDesc,
    ByTimeAsc,
}

/// What a new submission will be assigned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoryDraft {
    pub story_id: StoryId,
    pub version: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StoryStore {
    stories: Vec<StoryText>,
    index: HashMap<StoryId, usize>,
    by_chain: HashMap<ChainId, Vec<usize>>,
    latest_version: HashMap<(ChainId, WorkerId), u32>,
}

pub fn validate_body(body: &str) -> Result<()> {
    if body.trim().is_empty() {
        return Err(Error::EmptyBody);
    }
    if body.len() > MAX_BODY_BYTES {
        return Err(Error::BodyTooLong {
            len: body.len(),
            limit: MAX_BODY_BYTES,
        });
    }
    Ok(())
}

impl StoryStore {
    pub fn get(&self, id: StoryId) -> Option<&StoryText> {
        self.index.get(&id).map(|&i| &self.stories[i])
    }

    pub fn count(&self) -> usize {
        self.stories.len()
    }

    /// Every story in submission order.
    pub fn all(&self) -> &[StoryText] {
        &self.stories
    }

    /// Stories on one chain, in submission order.
    pub fn on_chain<'a>(&'a self, chain: &ChainId) -> impl Iterator<Item = &'a StoryText> + 'a {
        self.by_chain
            .get(chain)
            .into_iter()
            .flatten()
            .map(|&i| &self.stories[i])
    }

    pub fn latest_version(&self, chain: &ChainId, author: WorkerId) -> u32 {
        self.latest_version.get(&(chain.clone(), author)).copied().unwrap_or(0)
    }

    /// Ordered listing; `tally` supplies each story's active vote count.
    pub fn list(&self, chain: &ChainId, ordering: StoryOrdering, tally: impl Fn(StoryId) -> u64) -> Vec<&StoryText> {
        let mut out: Vec<&StoryText> = self.on_chain(chain).collect();
        // stable: equal keys keep submission order
        match ordering {
            StoryOrdering::ByTimeAsc => out.sort_by_key(|s| s.created_at),
            StoryOrdering::ByVotesDesc => out.sort_by(|a, b| {
                tally(b.story_id)
                    .cmp(&tally(a.story_id))
                    .then(a.created_at.cmp(&b.created_at))
            }),
        }
        out
    }

    /// Validates a submission against story-level rules and assigns its id and version.
    /// The caller has already checked that `chain` exists.
    pub fn draft(
        &self,
        chain: &ChainId,
        author: WorkerId,
        body: &str,
        derived_from: Option<StoryId>,
    ) -> Result<StoryDraft> {
        validate_body(body)?;
        if let Some(parent) = derived_from {
            let parent = self.get(parent).ok_or(Error::UnknownStory(parent))?;
            if &parent.chain_id != chain {
                return Err(Error::CrossChainDerivation(parent.story_id));
            }
        }
        Ok(StoryDraft {
            story_id: StoryId::new(self.stories.len() as u64 + 1),
            version: self.latest_version(chain, author) + 1,
        })
    }

    pub(crate) fn insert(&mut self, story: StoryText) {
        let idx = self.stories.len();
        self.index.insert(story.story_id, idx);
        self.by_chain.entry(story.chain_id.clone()).or_default().push(idx);
        self.latest_version
            .insert((story.chain_id.clone(), story.author), story.version);
        self.stories.push(story);
    }
}
