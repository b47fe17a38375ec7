//! The shared image pool and the Image Chain store.
//!
//! Chains are immutable once stored except for their implicit vote counter.
//! Extending, branching or merging always produces a new chain; proposing a
//! sequence that already exists credits the existing chain with a vote instead.

use std::collections::{BTreeSet, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{canonical_chain_id, ChainId, ImageId, WorkerId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageOrigin {
    /// Seeded starting pool.
    BasePool,
    WorkerUpload,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: ImageId,
    pub description: String,
    pub uploader: WorkerId,
    pub uploaded_at: DateTime<Utc>,
    pub origin: ImageOrigin,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Provenance {
    Fresh,
    BranchOf { parent: ChainId, prefix_len: usize },
    MergeOf { first: ChainId, second: ChainId },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageChain {
    pub chain_id: ChainId,
    pub sequence: Vec<ImageId>,
    pub creator: WorkerId,
    pub contributors: BTreeSet<WorkerId>,
    pub implicit_votes: u64,
    pub created_at: DateTime<Utc>,
    pub provenance: Provenance,
}

impl ImageChain {
    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn base_image(&self) -> &ImageId {
        &self.sequence[0]
    }
}

/// Result of any chain-creating operation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ChainOutcome {
    Created {
        chain: ImageChain,
    },
    /// The proposed sequence already existed; its implicit vote count after the increment.
    DuplicateVoted {
        chain_id: ChainId,
        implicit_votes: u64,
    },
}

impl ChainOutcome {
    pub fn chain_id(&self) -> &ChainId {
        match self {
            ChainOutcome::Created { chain } => &chain.chain_id,
            ChainOutcome::DuplicateVoted { chain_id, .. } => chain_id,
        }
    }

    pub fn is_created(&self) -> bool {
        matches!(self, ChainOutcome::Created { .. })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainFilter {
    pub min_len: Option<usize>,
    pub max_len: Option<usize>,
    pub containing_image: Option<ImageId>,
}

impl ChainFilter {
    pub fn matches(&self, chain: &ImageChain) -> bool {
        self.min_len.is_none_or(|m| chain.len() >= m)
            && self.max_len.is_none_or(|m| chain.len() <= m)
            && self
                .containing_image
                .as_ref()
                .is_none_or(|img| chain.sequence.contains(img))
    }
}

/// A fully-resolved candidate chain, before the dedup decision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainProposal {
    pub chain_id: ChainId,
    pub sequence: Vec<ImageId>,
    pub contributors: BTreeSet<WorkerId>,
    pub provenance: Provenance,
}

impl ChainProposal {
    fn new(sequence: Vec<ImageId>, contributors: BTreeSet<WorkerId>, provenance: Provenance) -> Result<Self> {
        Ok(Self {
            chain_id: canonical_chain_id(&sequence)?,
            sequence,
            contributors,
            provenance,
        })
    }
}

/// Joins two sequences, collapsing a repeated image at the seam only.
pub fn merge_sequences(first: &[ImageId], second: &[ImageId]) -> Vec<ImageId> {
    let skip = usize::from(matches!((first.last(), second.first()), (Some(a), Some(b)) if a == b));
    first.iter().chain(&second[skip..]).cloned().collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChainStore {
    images: Vec<ImageRecord>,
    image_index: HashMap<ImageId, usize>,
    chains: Vec<ImageChain>,
    chain_index: HashMap<ChainId, usize>,
}

impl ChainStore {
    pub fn image(&self, id: &ImageId) -> Option<&ImageRecord> {
        self.image_index.get(id).map(|&i| &self.images[i])
    }

    /// All pool images in upload order.
    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn pool_size(&self) -> usize {
        self.images.len()
    }

    pub fn chain(&self, id: &ChainId) -> Option<&ImageChain> {
        self.chain_index.get(id).map(|&i| &self.chains[i])
    }

    /// All chains in insertion order.
    pub fn chains(&self) -> &[ImageChain] {
        &self.chains
    }

    pub fn chain_count(&self) -> usize {
        self.chains.len()
    }

    pub fn list_chains(&self, filter: &ChainFilter) -> Vec<&ImageChain> {
        let mut out: Vec<&ImageChain> = self.chains.iter().filter(|c| filter.matches(c)).collect();
        out.sort_by_key(|c| c.created_at);
        out
    }

    fn require_chain(&self, id: &ChainId) -> Result<&ImageChain> {
        self.chain(id).ok_or_else(|| Error::UnknownChain(id.clone()))
    }

    fn require_images(&self, ids: &[ImageId]) -> Result<()> {
        match ids.iter().find(|id| !self.image_index.contains_key(id)) {
            Some(missing) => Err(Error::UnknownImage(missing.clone())),
            None => Ok(()),
        }
    }

    pub fn propose_start(&self, base: &ImageId, worker: WorkerId) -> Result<ChainProposal> {
        self.require_images(std::slice::from_ref(base))?;
        ChainProposal::new(vec![base.clone()], BTreeSet::from([worker]), Provenance::Fresh)
    }

    pub fn propose_extend(&self, parent: &ChainId, appended: &[ImageId], worker: WorkerId) -> Result<ChainProposal> {
        let prefix_len = self.require_chain(parent)?.len();
        self.propose_branch(parent, prefix_len, appended, worker)
    }

    pub fn propose_branch(
        &self,
        parent: &ChainId,
        prefix_len: usize,
        appended: &[ImageId],
        worker: WorkerId,
    ) -> Result<ChainProposal> {
        let parent_chain = self.require_chain(parent)?;
        if prefix_len == 0 || prefix_len > parent_chain.len() {
            return Err(Error::PrefixOutOfRange {
                prefix_len,
                parent_len: parent_chain.len(),
            });
        }
        if appended.is_empty() {
            return Err(Error::EmptyExtension);
        }
        self.require_images(appended)?;
        let sequence = parent_chain.sequence[..prefix_len]
            .iter()
            .chain(appended)
            .cloned()
            .collect();
        let mut contributors = parent_chain.contributors.clone();
        contributors.insert(worker);
        ChainProposal::new(
            sequence,
            contributors,
            Provenance::BranchOf {
                parent: parent.clone(),
                prefix_len,
            },
        )
    }

    pub fn propose_merge(&self, first: &ChainId, second: &ChainId, worker: WorkerId) -> Result<ChainProposal> {
        let a = self.require_chain(first)?;
        let b = self.require_chain(second)?;
        let mut contributors: BTreeSet<WorkerId> = a.contributors.union(&b.contributors).copied().collect();
        contributors.insert(worker);
        ChainProposal::new(
            merge_sequences(&a.sequence, &b.sequence),
            contributors,
            Provenance::MergeOf {
                first: first.clone(),
                second: second.clone(),
            },
        )
    }

    /// Returns the stored chain whose sequence equals `sequence`, if any.
    pub fn find_sequence(&self, chain_id: &ChainId, sequence: &[ImageId]) -> Result<Option<&ImageChain>> {
        match self.chain(chain_id) {
            Some(existing) if existing.sequence == sequence => Ok(Some(existing)),
            Some(_) => Err(Error::HashCollision(chain_id.clone())),
            None => Ok(None),
        }
    }

    pub(crate) fn insert_image(&mut self, record: ImageRecord) {
        debug_assert!(!self.image_index.contains_key(&record.image_id));
        self.image_index.insert(record.image_id.clone(), self.images.len());
        self.images.push(record);
    }

    pub(crate) fn insert_chain(&mut self, chain: ImageChain) {
        debug_assert!(!self.chain_index.contains_key(&chain.chain_id));
        self.chain_index.insert(chain.chain_id.clone(), self.chains.len());
        self.chains.push(chain);
    }

    pub(crate) fn add_implicit_vote(&mut self, id: &ChainId) -> Result<u64> {
        let idx = *self
            .chain_index
            .get(id)
            .ok_or_else(|| Error::UnknownChain(id.clone()))?;
        let chain = &mut self.chains[idx];
        chain.implicit_votes += 1;
        Ok(chain.implicit_votes)
    }
}
