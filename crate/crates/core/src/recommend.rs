//! Recommendation lists: deterministic top-k by chain score, and seeded
//! score-weighted sampling without replacement.
//!
//! Sampling uses ChaCha8 seeded with `seed_from_u64`, and draws uniform reals
//! as `(next_u64 >> 11) * 2^-53`, so a seed reproduces the same list on every
//! build.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chain::{ChainFilter, ImageChain};
use crate::platform::Platform;
use crate::story::StoryText;

/// Added to every chain score so unvoted chains can still be drawn.
pub const DEFAULT_SMOOTHING: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Recommendation<'a> {
    pub chain: &'a ImageChain,
    pub score: u64,
    pub story: Option<&'a StoryText>,
}

fn scored_chains(platform: &Platform) -> Vec<(&ImageChain, u64)> {
    platform
        .list_chains(&ChainFilter::default())
        .into_iter()
        .map(|c| {
            let score = platform.chain_score(&c.chain_id).expect("listed chain exists");
            (c, score)
        })
        .collect()
}

/// Chains by score descending, earlier creation first on ties, each paired
/// with its best story.
pub fn recommend_top(platform: &Platform, k: usize) -> Vec<Recommendation<'_>> {
    let mut scored = scored_chains(platform);
    // list order is created_at ascending and the sort is stable
    scored.sort_by_key(|s| std::cmp::Reverse(s.1));
    scored
        .into_iter()
        .take(k)
        .map(|(chain, score)| Recommendation {
            chain,
            score,
            story: platform.best_story(&chain.chain_id),
        })
        .collect()
}

/// Exact probability of each item being picked by a single draw.
pub fn draw_probabilities(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

fn unit_interval(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws up to `k` distinct indices; each draw picks among the remaining items
/// with probability proportional to weight. Weights must be finite and
/// positive.
pub fn sample_weighted(weights: &[f64], k: usize, rng: &mut impl RngCore) -> Vec<usize> {
    debug_assert!(weights.iter().all(|w| w.is_finite() && *w > 0.0));
    let mut remaining: Vec<usize> = (0..weights.len()).collect();
    let mut picked = Vec::with_capacity(k.min(weights.len()));
    while picked.len() < k && !remaining.is_empty() {
        let total: f64 = remaining.iter().map(|&i| weights[i]).sum();
        let target = unit_interval(rng) * total;
        let mut acc = 0.0;
        let mut pos = remaining.len() - 1;
        for (j, &i) in remaining.iter().enumerate() {
            acc += weights[i];
            if target < acc {
                pos = j;
                break;
            }
        }
        picked.push(remaining.remove(pos));
    }
    picked
}

/// `k` chains drawn without replacement with weight `score + smoothing`.
pub fn recommend_sampled(platform: &Platform, k: usize, seed: u64, smoothing: f64) -> Vec<&ImageChain> {
    let scored = scored_chains(platform);
    let weights: Vec<f64> = scored.iter().map(|(_, s)| *s as f64 + smoothing).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_weighted(&weights, k, &mut rng)
        .into_iter()
        .map(|i| scored[i].0)
        .collect()
}
