//! The per-step behaviour policy, shared by every target.

use std::collections::HashMap;

use chainstory_core::recommend::sample_weighted;
use chainstory_core::{ChainId, ChainOutcome, ImageId, StoryId};
use rand::{Rng, RngCore};
use serde::Serialize;

use crate::profile::BehaviorProfile;
use crate::SimError;

/// What the policy needs to know about one chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainInfo {
    pub chain_id: ChainId,
    pub len: usize,
    pub story_count: usize,
}

/// A store the simulated workers act on. Workers are addressed by index.
pub trait Backend {
    /// All chains, oldest first.
    fn chains(&mut self) -> Result<Vec<ChainInfo>, SimError>;
    /// Every story on a chain, oldest first.
    fn stories(&mut self, chain: &ChainId) -> Result<Vec<StoryId>, SimError>;
    fn start(&mut self, worker: usize, base: &ImageId) -> Result<ChainOutcome, SimError>;
    fn extend(&mut self, worker: usize, parent: &ChainId, images: &[ImageId]) -> Result<ChainOutcome, SimError>;
    fn branch(
        &mut self,
        worker: usize,
        parent: &ChainId,
        prefix_len: usize,
        images: &[ImageId],
    ) -> Result<ChainOutcome, SimError>;
    fn merge(&mut self, worker: usize, first: &ChainId, second: &ChainId) -> Result<ChainOutcome, SimError>;
    fn submit(
        &mut self,
        worker: usize,
        chain: &ChainId,
        body: &str,
        derived_from: Option<StoryId>,
    ) -> Result<StoryId, SimError>;
    fn vote(&mut self, worker: usize, story: StoryId) -> Result<(), SimError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Start,
    Extend,
    Branch,
    Merge,
    Write,
    Vote,
}

/// Running totals of what the workers did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ActionCounts {
    pub starts: u64,
    pub extends: u64,
    pub branches: u64,
    pub merges: u64,
    pub stories: u64,
    pub votes: u64,
    /// Chain operations that created a new chain.
    pub chains_created: u64,
    /// Chain operations that hit an existing sequence and became an implicit vote.
    pub duplicates: u64,
    /// Steps whose drawn action had no target and started a chain instead.
    pub fallbacks: u64,
}

impl ActionCounts {
    pub fn merge(&mut self, other: &ActionCounts) {
        self.starts += other.starts;
        self.extends += other.extends;
        self.branches += other.branches;
        self.merges += other.merges;
        self.stories += other.stories;
        self.votes += other.votes;
        self.chains_created += other.chains_created;
        self.duplicates += other.duplicates;
        self.fallbacks += other.fallbacks;
    }

    fn record(&mut self, outcome: &ChainOutcome) {
        if outcome.is_created() {
            self.chains_created += 1;
        } else {
            self.duplicates += 1;
        }
    }
}

const WORDS: &[&str] = &[
    "the", "a", "river", "girl", "storm", "lantern", "market", "old", "bridge", "dog", "ran", "slowly", "through",
    "night", "found", "letter", "under", "mountain", "quiet", "train", "smiled", "window", "rain", "across", "city",
    "lost", "key", "morning", "boat", "song",
];

/// Chooses and performs one action per step. Remembers each worker's own
/// active votes so a step never repeats a vote it already holds.
pub struct Actor<R> {
    profile: BehaviorProfile,
    images: Vec<ImageId>,
    rng: R,
    own_votes: HashMap<(usize, ChainId), StoryId>,
    pub counts: ActionCounts,
}

fn pick_weighted(weights: &[f64], rng: &mut impl RngCore) -> usize {
    let clamped: Vec<f64> = weights.iter().map(|w| w.max(f64::MIN_POSITIVE)).collect();
    sample_weighted(&clamped, 1, rng)[0]
}

impl<R: RngCore> Actor<R> {
    pub fn new(profile: BehaviorProfile, images: Vec<ImageId>, rng: R) -> Self {
        assert!(!images.is_empty(), "simulation needs a non-empty image pool");
        Self {
            profile,
            images,
            rng,
            own_votes: HashMap::new(),
            counts: ActionCounts::default(),
        }
    }

    pub fn rng(&mut self) -> &mut R {
        &mut self.rng
    }

    fn draw_action(&mut self) -> Action {
        let p = &self.profile;
        let u: f64 = self.rng.random();
        if u < p.p_start {
            Action::Start
        } else if u < p.p_start + p.p_extend {
            let v: f64 = self.rng.random();
            if v < p.merge_share {
                Action::Merge
            } else if v < p.merge_share + p.branch_share {
                Action::Branch
            } else {
                Action::Extend
            }
        } else if u < p.p_start + p.p_extend + p.p_write {
            Action::Write
        } else {
            Action::Vote
        }
    }

    fn fresh_images(&mut self) -> Vec<ImageId> {
        let u: f64 = self.rng.random();
        let sizes = self.profile.extension_size;
        let n = if u < sizes[0] {
            1
        } else if u < sizes[0] + sizes[1] {
            2
        } else {
            3
        };
        (0..n)
            .map(|_| self.images[self.rng.random_range(0..self.images.len())].clone())
            .collect()
    }

    fn extend_parent(&mut self, chains: &[ChainInfo]) -> usize {
        let shortest = chains.iter().map(|c| c.len).min().unwrap_or(1);
        let weights: Vec<f64> = chains
            .iter()
            .map(|c| (-self.profile.extend_length_bias * (c.len - shortest) as f64).exp())
            .collect();
        pick_weighted(&weights, &mut self.rng)
    }

    fn story_body(&mut self, worker: usize) -> String {
        let n = self.rng.random_range(8..20);
        let words: Vec<&str> = (0..n).map(|_| WORDS[self.rng.random_range(0..WORDS.len())]).collect();
        format!("Worker {worker}: {}.", words.join(" "))
    }

    fn start(&mut self, backend: &mut impl Backend, worker: usize) -> Result<Action, SimError> {
        let base = self.images[self.rng.random_range(0..self.images.len())].clone();
        let outcome = backend.start(worker, &base)?;
        self.counts.starts += 1;
        self.counts.record(&outcome);
        Ok(Action::Start)
    }

    fn fallback(&mut self, backend: &mut impl Backend, worker: usize) -> Result<Action, SimError> {
        self.counts.fallbacks += 1;
        self.start(backend, worker)
    }

    /// Performs one step for `worker` and reports the action taken.
    pub fn step(&mut self, backend: &mut impl Backend, worker: usize) -> Result<Action, SimError> {
        match self.draw_action() {
            Action::Start => self.start(backend, worker),
            Action::Extend => {
                let chains = backend.chains()?;
                if chains.is_empty() {
                    return self.fallback(backend, worker);
                }
                let parent = chains[self.extend_parent(&chains)].chain_id.clone();
                let images = self.fresh_images();
                let outcome = backend.extend(worker, &parent, &images)?;
                self.counts.extends += 1;
                self.counts.record(&outcome);
                Ok(Action::Extend)
            }
            Action::Branch => {
                let chains = backend.chains()?;
                if chains.is_empty() {
                    return self.fallback(backend, worker);
                }
                let parent = &chains[self.extend_parent(&chains)];
                let prefix_len = self.rng.random_range(1..=parent.len);
                let images = self.fresh_images();
                let outcome = backend.branch(worker, &parent.chain_id, prefix_len, &images)?;
                self.counts.branches += 1;
                self.counts.record(&outcome);
                Ok(Action::Branch)
            }
            Action::Merge => {
                let chains = backend.chains()?;
                if chains.is_empty() {
                    return self.fallback(backend, worker);
                }
                let first = chains[self.extend_parent(&chains)].chain_id.clone();
                let second = chains[self.extend_parent(&chains)].chain_id.clone();
                let outcome = backend.merge(worker, &first, &second)?;
                self.counts.merges += 1;
                self.counts.record(&outcome);
                Ok(Action::Merge)
            }
            Action::Write => {
                let chains = backend.chains()?;
                if chains.is_empty() {
                    return self.fallback(backend, worker);
                }
                let chain = &chains[self.rng.random_range(0..chains.len())];
                let derive = chain.story_count > 0 && self.rng.random::<f64>() < self.profile.derive_share;
                let derived_from = if derive {
                    let stories = backend.stories(&chain.chain_id)?;
                    Some(stories[self.rng.random_range(0..stories.len())])
                } else {
                    None
                };
                let body = self.story_body(worker);
                backend.submit(worker, &chain.chain_id, &body, derived_from)?;
                self.counts.stories += 1;
                Ok(Action::Write)
            }
            Action::Vote => {
                let chains: Vec<ChainInfo> = backend.chains()?.into_iter().filter(|c| c.story_count > 0).collect();
                if chains.is_empty() {
                    return self.fallback(backend, worker);
                }
                let longest = chains.iter().map(|c| c.len).max().unwrap_or(1);
                let weights: Vec<f64> = chains
                    .iter()
                    .map(|c| (self.profile.vote_length_bias * (c.len as f64 - longest as f64)).exp())
                    .collect();
                let chain = chains[pick_weighted(&weights, &mut self.rng)].chain_id.clone();
                let held = self.own_votes.get(&(worker, chain.clone())).copied();
                let options: Vec<StoryId> = backend
                    .stories(&chain)?
                    .into_iter()
                    .filter(|s| Some(*s) != held)
                    .collect();
                if options.is_empty() {
                    return self.fallback(backend, worker);
                }
                let story = options[self.rng.random_range(0..options.len())];
                backend.vote(worker, story)?;
                self.own_votes.insert((worker, chain), story);
                self.counts.votes += 1;
                Ok(Action::Vote)
            }
        }
    }
}
