//! Synthetic deployment-scale data: 25 workers, a 30-image starting pool grown
//! to 64 images, 34 multi-image chains and 22 voted stories.
//!
//! The per-chain data behind the published deployment summary is not
//! available, so this fixture is built to be arithmetically consistent with the
//! summary's cohort figures rather than to reproduce it.

use std::sync::Arc;

use crate::analytics::ChainSample;
use crate::chain::ChainOutcome;
use crate::clock::SteppedClock;
use crate::error::Result;
use crate::ids::{ChainId, ImageId, WorkerId};
use crate::store::Store;

pub const WORKERS: usize = 25;
pub const BASE_IMAGES: usize = 30;
pub const UPLOADED_IMAGES: usize = 34;

/// `(length, chains)` for the 34 multi-image chains.
pub const LENGTH_HISTOGRAM: [(usize, usize); 10] = [
    (2, 7),
    (3, 6),
    (4, 5),
    (5, 4),
    (6, 2),
    (7, 2),
    (8, 2),
    (9, 2),
    (10, 2),
    (11, 2),
];

/// Story tallies on chains of length <= 5 (mean 2.4).
pub const LOW_STORY_TALLIES: [u64; 10] = [2, 3, 2, 3, 2, 3, 2, 3, 2, 2];
/// Story tallies on chains of length > 5 (mean 23/6).
pub const HIGH_STORY_TALLIES: [u64; 12] = [4, 4, 4, 4, 4, 4, 4, 4, 4, 3, 3, 4];

fn lengths() -> impl Iterator<Item = usize> {
    LENGTH_HISTOGRAM
        .iter()
        .flat_map(|&(len, n)| std::iter::repeat_n(len, n))
}

/// The histogram as bare chain samples with synthetic ids.
pub fn histogram_samples() -> Vec<ChainSample> {
    lengths()
        .enumerate()
        .map(|(i, length)| ChainSample {
            chain_id: ChainId::of_sequence(&[ImageId::of_bytes(format!("sample-{i}").as_bytes())]).expect("non-empty"),
            length,
        })
        .collect()
}

pub struct Deployment {
    pub store: Store,
    pub workers: Vec<WorkerId>,
    /// The 34 multi-image chains, in creation order.
    pub chains: Vec<ChainId>,
}

/// Builds the deployment through the public store operations.
pub fn deployment() -> Result<Deployment> {
    let store = Store::in_memory(Arc::new(SteppedClock::default()));
    let workers = (1..=WORKERS)
        .map(|i| store.register_worker(&format!("worker {i}"), &format!("fixture-token-{i}")))
        .map(|r| r.map(|w| w.worker_id))
        .collect::<Result<Vec<_>>>()?;
    let w = |i: usize| workers[i % WORKERS];

    let mut base = Vec::with_capacity(BASE_IMAGES);
    for i in 0..BASE_IMAGES {
        let (img, _) = store.seed_base_image(
            format!("base-image-{i}").as_bytes(),
            &format!("starting scene {i}"),
            w(0),
        )?;
        base.push(img.image_id);
    }
    let mut uploads = Vec::with_capacity(UPLOADED_IMAGES);
    for i in 0..UPLOADED_IMAGES {
        let (img, _) = store.add_image(format!("upload-{i}").as_bytes(), &format!("uploaded scene {i}"), w(i))?;
        uploads.push(img.image_id);
    }

    let mut chains = Vec::new();
    for (i, len) in lengths().enumerate() {
        let creator = w(i);
        let b = &base[i % BASE_IMAGES];
        let root = ChainId::of_sequence(std::slice::from_ref(b))?;
        if store.read(|p| p.chain(&root).is_none()) {
            store.start_chain(b, creator)?;
        }
        let rest: Vec<ImageId> = (0..len - 1)
            .map(|j| uploads[(i + j) % UPLOADED_IMAGES].clone())
            .collect();
        match store.extend_chain(&root, &rest, creator)? {
            ChainOutcome::Created { chain } => chains.push(chain.chain_id),
            other => unreachable!("fixture chains are distinct, got {other:?}"),
        }
    }

    let low: Vec<&ChainId> = chains.iter().take(22).collect();
    let high: Vec<&ChainId> = chains.iter().skip(22).collect();
    let plan = low
        .iter()
        .zip(LOW_STORY_TALLIES)
        .chain(high.iter().zip(HIGH_STORY_TALLIES));
    for (n, (chain, tally)) in plan.enumerate() {
        let author = w(n + 3);
        let story = store.submit_story(chain, author, &format!("story number {n}"), None)?;
        for v in 0..tally as usize {
            store.vote_story(story.story_id, w(n + v))?;
        }
    }
    Ok(Deployment { store, workers, chains })
}
