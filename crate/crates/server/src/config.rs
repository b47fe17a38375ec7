use std::net::SocketAddr;
use std::path::PathBuf;

use chainstory_core::analytics::{AnalyticsConfig, DEFAULT_MIN_LENGTH, DEFAULT_THRESHOLD};
use chainstory_core::recommend::DEFAULT_SMOOTHING;
use chainstory_core::LeaderboardWeights;
use clap::Parser;

/// Prefix shared by every environment variable the service reads.
pub const ENV_PREFIX: &str = "CHAINSTORY_";

/// Service configuration. Every flag can also be set through the
/// environment variable shown in `--help`.
#[derive(Clone, Debug, Parser)]
#[command(name = "chainstory-server", version, about = "Image-chain storytelling service")]
pub struct Config {
    /// Directory holding events.log and the blob store.
    #[arg(long, env = "CHAINSTORY_DATA_DIR", default_value = "./data")]
    pub data_dir: PathBuf,

    /// Address to listen on. Port 0 picks a free port.
    #[arg(long, env = "CHAINSTORY_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,

    #[arg(long, env = "CHAINSTORY_WEIGHT_IMAGE", default_value_t = 1)]
    pub weight_image: u64,

    #[arg(long, env = "CHAINSTORY_WEIGHT_CHAIN", default_value_t = 1)]
    pub weight_chain: u64,

    #[arg(long, env = "CHAINSTORY_WEIGHT_STORY", default_value_t = 1)]
    pub weight_story: u64,

    #[arg(long, env = "CHAINSTORY_WEIGHT_VOTE", default_value_t = 2)]
    pub weight_vote: u64,

    /// Added to every chain score for sampled recommendations.
    #[arg(long, env = "CHAINSTORY_SMOOTHING", default_value_t = DEFAULT_SMOOTHING)]
    pub smoothing: f64,

    /// Cohort split point for analytics: short chains have length <= threshold.
    #[arg(long, env = "CHAINSTORY_THRESHOLD", default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: usize,

    /// Chains shorter than this are left out of analytics.
    #[arg(long, env = "CHAINSTORY_MIN_LENGTH", default_value_t = DEFAULT_MIN_LENGTH)]
    pub min_length: usize,
}

impl Config {
    pub fn with_data_dir(data_dir: impl Into<PathBuf>, listen: SocketAddr) -> Self {
        let mut cfg = Config::parse_from(["chainstory-server"]);
        cfg.data_dir = data_dir.into();
        cfg.listen = listen;
        cfg
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.smoothing.is_finite() && self.smoothing > 0.0) {
            return Err(format!("smoothing must be finite and positive, got {}", self.smoothing));
        }
        if self.threshold == 0 {
            return Err("threshold must be at least 1".into());
        }
        if self.min_length == 0 {
            return Err("min_length must be at least 1".into());
        }
        Ok(())
    }

    pub fn weights(&self) -> LeaderboardWeights {
        LeaderboardWeights {
            image_uploaded: self.weight_image,
            chain_created: self.weight_chain,
            story_submitted: self.weight_story,
            vote_received: self.weight_vote,
        }
    }

    pub fn analytics(&self) -> AnalyticsConfig {
        AnalyticsConfig {
            threshold: self.threshold,
            min_length: self.min_length,
            ..AnalyticsConfig::default()
        }
    }
}
