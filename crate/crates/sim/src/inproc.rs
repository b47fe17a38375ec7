//! Single-threaded simulation against an in-memory store.

use std::sync::{Arc, Mutex};

use chainstory_core::blob::MemBlobStore;
use chainstory_core::clock::SteppedClock;
use chainstory_core::log::LogWriter;
use chainstory_core::{ChainId, ChainOutcome, ImageId, Platform, Store, StoryId, WorkerId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Actor, Backend, ChainInfo};
use crate::{base_image, SimError, BASE_POOL_SIZE};

pub struct StoreBackend<'a> {
    pub store: &'a Store,
    pub workers: Vec<WorkerId>,
}

impl Backend for StoreBackend<'_> {
    fn chains(&mut self) -> Result<Vec<ChainInfo>, SimError> {
        Ok(self.store.read(|p| {
            p.chains()
                .chains()
                .iter()
                .map(|c| ChainInfo {
                    chain_id: c.chain_id.clone(),
                    len: c.len(),
                    story_count: p.stories().on_chain(&c.chain_id).count(),
                })
                .collect()
        }))
    }

    fn stories(&mut self, chain: &ChainId) -> Result<Vec<StoryId>, SimError> {
        Ok(self
            .store
            .read(|p| p.stories().on_chain(chain).map(|s| s.story_id).collect()))
    }

    fn start(&mut self, worker: usize, base: &ImageId) -> Result<ChainOutcome, SimError> {
        Ok(self.store.start_chain(base, self.workers[worker])?)
    }

    fn extend(&mut self, worker: usize, parent: &ChainId, images: &[ImageId]) -> Result<ChainOutcome, SimError> {
        Ok(self.store.extend_chain(parent, images, self.workers[worker])?)
    }

    fn branch(
        &mut self,
        worker: usize,
        parent: &ChainId,
        prefix_len: usize,
        images: &[ImageId],
    ) -> Result<ChainOutcome, SimError> {
        Ok(self
            .store
            .branch_chain(parent, prefix_len, images, self.workers[worker])?)
    }

    fn merge(&mut self, worker: usize, first: &ChainId, second: &ChainId) -> Result<ChainOutcome, SimError> {
        Ok(self.store.merge_chains(first, second, self.workers[worker])?)
    }

    fn submit(
        &mut self,
        worker: usize,
        chain: &ChainId,
        body: &str,
        derived_from: Option<StoryId>,
    ) -> Result<StoryId, SimError> {
        Ok(self
            .store
            .submit_story(chain, self.workers[worker], body, derived_from)?
            .story_id)
    }

    fn vote(&mut self, worker: usize, story: StoryId) -> Result<(), SimError> {
        self.store.vote_story(story, self.workers[worker])?;
        Ok(())
    }
}

/// Outcome of an in-process run.
pub struct InProcessRun {
    pub store: Store,
    pub workers: Vec<WorkerId>,
    /// Events appended while seeding workers and the base pool.
    pub seed_events: u64,
    pub counts: crate::engine::ActionCounts,
    /// The complete event log, byte for byte.
    pub log: Vec<u8>,
}

/// Registers `workers`, seeds the base pool, then runs `steps` steps, each by
/// a uniformly chosen worker. Deterministic in all inputs.
pub fn run(workers: usize, steps: u64, seed: u64, profile: &crate::BehaviorProfile) -> Result<InProcessRun, SimError> {
    let sink = Arc::new(Mutex::new(LogWriter::create(Vec::<u8>::new())?));
    let store = Store::new(
        Platform::new(),
        Box::new(sink.clone()),
        Arc::new(MemBlobStore::default()),
        Arc::new(SteppedClock::default()),
    );
    let ids = (0..workers)
        .map(|i| {
            store
                .register_worker(&format!("sim worker {}", i + 1), &format!("sim-token-{}", i + 1))
                .map(|w| w.worker_id)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut images = Vec::with_capacity(BASE_POOL_SIZE);
    for i in 0..BASE_POOL_SIZE {
        let (blob, description) = base_image(i);
        images.push(store.seed_base_image(&blob, &description, ids[0])?.0.image_id);
    }
    let seed_events = store.read(|p| p.last_seq());

    let mut actor = Actor::new(profile.clone(), images, ChaCha8Rng::seed_from_u64(seed));
    let mut backend = StoreBackend {
        store: &store,
        workers: ids.clone(),
    };
    for _ in 0..steps {
        let worker = actor.rng().random_range(0..workers);
        actor.step(&mut backend, worker)?;
    }
    let counts = actor.counts;
    let log = sink.lock().expect("log writer lock").get_ref().clone();
    Ok(InProcessRun {
        store,
        workers: ids,
        seed_events,
        counts,
        log,
    })
}
