//! Brute-force reference for chain creation: every stored sequence lives in a
//! flat list and duplicates are found by linear scan. Shared by the core tests
//! and the acceptance suite.

#![allow(dead_code)]

use chainstory_core::{ChainOutcome, ImageId, Store, WorkerId};
use rand::Rng;

#[derive(Clone, Debug)]
pub enum Op {
    Start {
        image: usize,
    },
    Extend {
        chain: usize,
        images: Vec<usize>,
    },
    Branch {
        chain: usize,
        prefix: usize,
        images: Vec<usize>,
    },
    Merge {
        first: usize,
        second: usize,
    },
}

fn images<R: Rng>(rng: &mut R) -> Vec<usize> {
    let n = rng.random_range(1..=3);
    (0..n).map(|_| rng.random_range(0..usize::MAX)).collect()
}

pub fn random_ops<R: Rng>(rng: &mut R, n_ops: usize) -> Vec<Op> {
    (0..n_ops)
        .map(|_| match rng.random_range(0..4) {
            0 => Op::Start {
                image: rng.random_range(0..usize::MAX),
            },
            1 => Op::Extend {
                chain: rng.random_range(0..usize::MAX),
                images: images(rng),
            },
            2 => Op::Branch {
                chain: rng.random_range(0..usize::MAX),
                prefix: rng.random_range(0..usize::MAX),
                images: images(rng),
            },
            _ => Op::Merge {
                first: rng.random_range(0..usize::MAX),
                second: rng.random_range(0..usize::MAX),
            },
        })
        .collect()
}

#[derive(Default, Debug)]
pub struct FlatOracle {
    /// `(sequence of pool indices, implicit votes)` in creation order.
    pub entries: Vec<(Vec<usize>, u64)>,
    pub created: usize,
    pub duplicates: usize,
}

impl FlatOracle {
    /// Returns `(created, index of the matching entry, votes after)`.
    pub fn propose(&mut self, seq: Vec<usize>) -> (bool, usize, u64) {
        for (i, (existing, votes)) in self.entries.iter_mut().enumerate() {
            if *existing == seq {
                *votes += 1;
                self.duplicates += 1;
                return (false, i, *votes);
            }
        }
        self.entries.push((seq, 0));
        self.created += 1;
        (true, self.entries.len() - 1, 0)
    }

    /// The candidate sequence for `op`, with chain/prefix/image references
    /// reduced modulo what currently exists.
    pub fn candidate(&self, op: &Op, pool: usize) -> Vec<usize> {
        let n = self.entries.len();
        let imgs = |v: &Vec<usize>| v.iter().map(|i| i % pool).collect::<Vec<_>>();
        match op {
            Op::Start { image } => vec![image % pool],
            _ if n == 0 => vec![0],
            Op::Extend { chain, images } => {
                let mut s = self.entries[chain % n].0.clone();
                s.extend(imgs(images));
                s
            }
            Op::Branch { chain, prefix, images } => {
                let parent = &self.entries[chain % n].0;
                let mut s = parent[..1 + prefix % parent.len()].to_vec();
                s.extend(imgs(images));
                s
            }
            Op::Merge { first, second } => {
                let a = &self.entries[first % n].0;
                let b = &self.entries[second % n].0;
                let mut s = a.clone();
                let skip = usize::from(a.last() == b.first());
                s.extend_from_slice(&b[skip..]);
                s
            }
        }
    }
}

/// Plays `ops` against both the store and the oracle and compares every
/// outcome plus the final chain set.
pub fn check_sequence(store: &Store, worker: WorkerId, pool: &[ImageId], ops: &[Op]) -> Result<FlatOracle, String> {
    let mut oracle = FlatOracle::default();
    let mut last_counts = (0usize, 0usize);
    for (step, op) in ops.iter().enumerate() {
        let candidate = oracle.candidate(op, pool.len());
        let chain_at = |i: usize| store.read(|p| p.chains().chains()[i].chain_id.clone());
        let n = store.read(|p| p.chains().chain_count());
        let ids = |v: &Vec<usize>| v.iter().map(|i| pool[i % pool.len()].clone()).collect::<Vec<_>>();
        let outcome = match op {
            Op::Start { image } => store.start_chain(&pool[image % pool.len()], worker),
            _ if n == 0 => store.start_chain(&pool[0], worker),
            Op::Extend { chain, images } => store.extend_chain(&chain_at(chain % n), &ids(images), worker),
            Op::Branch { chain, prefix, images } => {
                let parent = chain_at(chain % n);
                let len = store.read(|p| p.chain(&parent).unwrap().len());
                store.branch_chain(&parent, 1 + prefix % len, &ids(images), worker)
            }
            Op::Merge { first, second } => store.merge_chains(&chain_at(first % n), &chain_at(second % n), worker),
        }
        .map_err(|e| format!("step {step}: store error {e}"))?;
        let (created, idx, votes) = oracle.propose(candidate);
        match (&outcome, created) {
            (ChainOutcome::Created { chain }, true) => {
                if chain.implicit_votes != 0 {
                    return Err(format!("step {step}: new chain with votes"));
                }
            }
            (
                ChainOutcome::DuplicateVoted {
                    chain_id,
                    implicit_votes,
                },
                false,
            ) => {
                if *chain_id != chain_at(idx) || *implicit_votes != votes {
                    return Err(format!("step {step}: duplicate credited to the wrong chain"));
                }
            }
            _ => return Err(format!("step {step}: store said {outcome:?}, oracle created={created}")),
        }
        let counts = store.read(|p| (p.chains().pool_size(), p.chains().chain_count()));
        if counts.0 < last_counts.0 || counts.1 < last_counts.1 {
            return Err(format!("step {step}: store shrank"));
        }
        last_counts = counts;
    }
    // final state: same sequences, same votes, in creation order
    store.read(|p| {
        let chains = p.chains().chains();
        if chains.len() != oracle.entries.len() {
            return Err(format!(
                "{} chains stored, oracle has {}",
                chains.len(),
                oracle.entries.len()
            ));
        }
        for (c, (seq, votes)) in chains.iter().zip(&oracle.entries) {
            let want: Vec<ImageId> = seq.iter().map(|&i| pool[i].clone()).collect();
            if c.sequence != want || c.implicit_votes != *votes {
                return Err(format!("chain {} differs from oracle", c.chain_id));
            }
        }
        for i in 0..chains.len() {
            for j in i + 1..chains.len() {
                if chains[i].sequence == chains[j].sequence {
                    return Err("duplicate sequences stored".into());
                }
            }
        }
        let total_votes: u64 = chains.iter().map(|c| c.implicit_votes).sum();
        if oracle.created != chains.len() || oracle.duplicates as u64 != total_votes {
            return Err("conservation violated".into());
        }
        Ok(())
    })?;
    Ok(oracle)
}
