//! Post-run invariant scans.

use std::collections::{HashMap, HashSet};

use chainstory_core::log::read_log;
use chainstory_core::store::replay_records;
use chainstory_core::{canonical_chain_id, ChainId, ImageChain, ImageId, Platform};

use crate::engine::ActionCounts;

/// Chain ids and sequences are unique, ids are the canonical hash of their
/// sequence, and every referenced image is in the pool.
pub fn check_chains(chains: &[ImageChain], pool: &HashSet<ImageId>) -> Result<(), String> {
    let mut ids = HashSet::new();
    let mut sequences = HashSet::new();
    for c in chains {
        if !ids.insert(&c.chain_id) {
            return Err(format!("chain id {} appears twice", c.chain_id));
        }
        if !sequences.insert(&c.sequence) {
            return Err(format!("sequence of chain {} is stored twice", c.chain_id));
        }
        match canonical_chain_id(&c.sequence) {
            Ok(id) if id == c.chain_id => {}
            _ => return Err(format!("chain {} does not hash to its id", c.chain_id)),
        }
        if let Some(missing) = c.sequence.iter().find(|i| !pool.contains(*i)) {
            return Err(format!("chain {} references unknown image {missing}", c.chain_id));
        }
    }
    Ok(())
}

/// Nothing existing changed except vote counts going up, and the growth in
/// chains and implicit votes matches what the workers were told.
pub fn check_growth(before: &[ImageChain], after: &[ImageChain], counts: &ActionCounts) -> Result<(), String> {
    let now: HashMap<&ChainId, &ImageChain> = after.iter().map(|c| (&c.chain_id, c)).collect();
    for old in before {
        match now.get(&old.chain_id) {
            Some(c) if c.sequence == old.sequence && c.implicit_votes >= old.implicit_votes => {}
            Some(_) => return Err(format!("chain {} changed", old.chain_id)),
            None => return Err(format!("chain {} disappeared", old.chain_id)),
        }
    }
    let created = (after.len() - before.len()) as u64;
    if created != counts.chains_created {
        return Err(format!(
            "{created} chains appeared but {} creations were reported",
            counts.chains_created
        ));
    }
    let votes = |cs: &[ImageChain]| cs.iter().map(|c| c.implicit_votes).sum::<u64>();
    let gained = votes(after) - votes(before);
    if gained != counts.duplicates {
        return Err(format!(
            "implicit votes grew by {gained} but {} duplicates were reported",
            counts.duplicates
        ));
    }
    Ok(())
}

/// Full scan of an in-process run, including replay of its log.
pub fn check_platform(platform: &Platform, log: &[u8], seed_events: u64, counts: &ActionCounts) -> Result<(), String> {
    let pool: HashSet<ImageId> = platform.chains().images().iter().map(|i| i.image_id.clone()).collect();
    check_chains(platform.chains().chains(), &pool)?;
    check_growth(&[], platform.chains().chains(), counts)?;
    if platform.story_count() as u64 != counts.stories {
        return Err(format!(
            "{} stories stored, {} written",
            platform.story_count(),
            counts.stories
        ));
    }
    let steps = counts.starts + counts.extends + counts.branches + counts.merges + counts.stories + counts.votes;
    if platform.last_seq() != seed_events + steps {
        return Err(format!(
            "log holds {} events, expected {seed_events} from seeding plus one per step ({steps})",
            platform.last_seq()
        ));
    }
    let contents = read_log(log).map_err(|e| format!("log does not parse: {e}"))?;
    let replayed = replay_records(&contents.records).map_err(|e| format!("log does not replay: {e}"))?;
    if &replayed != platform {
        return Err("replaying the log gives a different state".into());
    }
    Ok(())
}
