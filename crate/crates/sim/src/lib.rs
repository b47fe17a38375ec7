//! Seeded crowd simulator. Synthetic workers start, extend, branch and merge
//! chains, write stories and vote, either against an in-memory store
//! (single-threaded and fully deterministic) or against a running service
//! (one concurrent client per worker).

pub mod checks;
pub mod engine;
pub mod inproc;
pub mod profile;
pub mod service;

use std::path::Path;

use chainstory_core::analytics::{analyze_platform, AnalyticsConfig, AnalyticsSummary};
use serde::Serialize;

pub use engine::{Action, ActionCounts};
pub use profile::BehaviorProfile;

/// Images seeded into the pool before the first step.
pub const BASE_POOL_SIZE: usize = 30;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid run: {0}")]
    InvalidConfig(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("target unreachable: {0}")]
    TargetUnreachable(String),
    #[error("http error: {0}")]
    Http(String),
    #[error("service answered {status}: {body}")]
    Service { status: u16, body: String },
    #[error(transparent)]
    Store(#[from] chainstory_core::Error),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    InProcess,
    /// Base URL of a running service, e.g. `http://127.0.0.1:8080`.
    Service(String),
}

impl std::str::FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "inproc" {
            Ok(Target::InProcess)
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(Target::Service(s.to_owned()))
        } else {
            Err(format!("target must be `inproc` or an http(s) URL, got {s:?}"))
        }
    }
}

/// Blob and description of the `i`th base-pool image.
pub fn base_image(i: usize) -> (Vec<u8>, String) {
    (
        format!("chainstory-sim base image {i:02}").into_bytes(),
        format!("base image {}", i + 1),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct SimReport {
    pub workers: usize,
    pub steps: u64,
    pub seed: u64,
    pub counts: ActionCounts,
    pub summary: AnalyticsSummary,
}

pub struct SimRun {
    pub report: SimReport,
    /// The event log, for in-process runs.
    pub log: Option<Vec<u8>>,
}

/// Runs one simulation. In-process runs are a pure function of
/// `(workers, steps, seed, profile)`, down to the bytes of the event log,
/// and are checked against the store invariants and log replay before
/// returning.
pub fn run_simulation(
    workers: usize,
    steps: u64,
    seed: u64,
    profile: &BehaviorProfile,
    target: &Target,
) -> Result<SimRun, SimError> {
    if workers == 0 {
        return Err(SimError::InvalidConfig("workers must be at least 1".into()));
    }
    if steps == 0 {
        return Err(SimError::InvalidConfig("steps must be at least 1".into()));
    }
    profile.validate()?;
    match target {
        Target::InProcess => {
            let run = inproc::run(workers, steps, seed, profile)?;
            let platform = run.store.snapshot();
            checks::check_platform(&platform, &run.log, run.seed_events, &run.counts)
                .map_err(SimError::InvariantViolation)?;
            Ok(SimRun {
                report: SimReport {
                    workers,
                    steps,
                    seed,
                    counts: run.counts,
                    summary: analyze_platform(&platform, &AnalyticsConfig::default()),
                },
                log: Some(run.log),
            })
        }
        Target::Service(url) => {
            let run = service::run(url, workers, steps, seed, profile)?;
            Ok(SimRun {
                report: SimReport {
                    workers,
                    steps,
                    seed,
                    counts: run.counts,
                    summary: run.summary,
                },
                log: None,
            })
        }
    }
}

/// Writes `summary.tsv`, `report.json` and, when present, `events.log`.
pub fn write_outputs(run: &SimRun, dir: &Path) -> Result<(), SimError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("summary.tsv"), run.report.summary.to_table())?;
    let json = serde_json::to_string_pretty(&run.report).map_err(|e| SimError::Io(e.into()))?;
    std::fs::write(dir.join("report.json"), json + "\n")?;
    if let Some(log) = &run.log {
        std::fs::write(dir.join("events.log"), log)?;
    }
    Ok(())
}
