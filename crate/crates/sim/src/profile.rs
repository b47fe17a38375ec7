use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::SimError;

const SUM_TOLERANCE: f64 = 1e-9;

/// Per-step behaviour of every simulated worker. Each step is an independent
/// categorical draw over the four actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorProfile {
    pub p_start: f64,
    pub p_extend: f64,
    pub p_write: f64,
    pub p_vote: f64,
    /// Parent chains are picked with weight `exp(-bias * length)`: larger
    /// values favour extending short chains.
    pub extend_length_bias: f64,
    /// Chains to vote on are picked with weight `exp(bias * length)`: larger
    /// values favour stories on long chains.
    pub vote_length_bias: f64,
    /// Probabilities of adding 1, 2 or 3 images per extension.
    pub extension_size: [f64; 3],
    /// Share of extend steps that branch off a random prefix instead.
    #[serde(default = "default_branch_share")]
    pub branch_share: f64,
    /// Share of extend steps that merge two chains instead.
    #[serde(default = "default_merge_share")]
    pub merge_share: f64,
    /// Chance that a new story names an existing one on the chain as its source.
    #[serde(default = "default_derive_share")]
    pub derive_share: f64,
}

fn default_branch_share() -> f64 {
    0.15
}

fn default_merge_share() -> f64 {
    0.03
}

fn default_derive_share() -> f64 {
    0.3
}

impl Default for BehaviorProfile {
    fn default() -> Self {
        Self {
            p_start: 0.12,
            p_extend: 0.4,
            p_write: 0.2,
            p_vote: 0.28,
            extend_length_bias: 0.15,
            vote_length_bias: 1.0,
            extension_size: [0.5, 0.3, 0.2],
            branch_share: default_branch_share(),
            merge_share: default_merge_share(),
            derive_share: default_derive_share(),
        }
    }
}

fn is_probability(p: f64) -> bool {
    p.is_finite() && (0.0..=1.0).contains(&p)
}

impl BehaviorProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidProfile(msg));
        let actions = [self.p_start, self.p_extend, self.p_write, self.p_vote];
        if !actions.iter().all(|&p| is_probability(p)) {
            return bad(format!("action probabilities must lie in [0, 1], got {actions:?}"));
        }
        let sum: f64 = actions.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return bad(format!("action probabilities sum to {sum}, not 1"));
        }
        if !self.extension_size.iter().all(|&p| is_probability(p)) {
            return bad(format!(
                "extension_size entries must lie in [0, 1], got {:?}",
                self.extension_size
            ));
        }
        let sum: f64 = self.extension_size.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return bad(format!("extension_size sums to {sum}, not 1"));
        }
        for (name, b) in [
            ("extend_length_bias", self.extend_length_bias),
            ("vote_length_bias", self.vote_length_bias),
        ] {
            if !(b.is_finite() && b >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {b}"));
            }
        }
        for (name, p) in [
            ("branch_share", self.branch_share),
            ("merge_share", self.merge_share),
            ("derive_share", self.derive_share),
        ] {
            if !is_probability(p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.branch_share + self.merge_share > 1.0 {
            return bad("branch_share + merge_share exceeds 1".into());
        }
        Ok(())
    }

    /// Reads a JSON profile; omitted share fields take their defaults.
    pub fn from_file(path: &Path) -> Result<Self, SimError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SimError::InvalidProfile(format!("{}: {e}", path.display())))?;
        let profile: Self =
            serde_json::from_str(&text).map_err(|e| SimError::InvalidProfile(format!("{}: {e}", path.display())))?;
        profile.validate()?;
        Ok(profile)
    }
}
