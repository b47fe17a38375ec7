//! Chain-length and vote analytics: length histograms, threshold cohorts,
//! per-cohort vote means and the two-sample t-tests comparing them.

mod stats;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use stats::{beta_reg, ln_gamma, t_two_sided_p, two_sample_t_test, StatsError, TTestResult, TTestVariant};

use crate::chain::ImageChain;
use crate::ids::ChainId;
use crate::platform::Platform;

pub const DEFAULT_THRESHOLD: usize = 5;
/// Shortest chain counted as a narrative; single-image chains are a started
/// story that nobody has continued yet.
pub const DEFAULT_MIN_LENGTH: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSample {
    pub chain_id: ChainId,
    pub length: usize,
}

impl From<&ImageChain> for ChainSample {
    fn from(c: &ImageChain) -> Self {
        Self {
            chain_id: c.chain_id.clone(),
            length: c.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub count: usize,
    /// `None` when there are no chains.
    pub mean_length: Option<f64>,
    pub max_length: Option<usize>,
    pub histogram: BTreeMap<usize, usize>,
}

pub fn length_summary(lengths: impl IntoIterator<Item = usize>) -> LengthSummary {
    let mut histogram = BTreeMap::new();
    for len in lengths {
        *histogram.entry(len).or_insert(0) += 1;
    }
    let count: usize = histogram.values().sum();
    let total: usize = histogram.iter().map(|(l, c)| l * c).sum();
    LengthSummary {
        count,
        mean_length: (count > 0).then(|| total as f64 / count as f64),
        max_length: histogram.keys().next_back().copied(),
        histogram,
    }
}

/// Per-length chain counts over a contiguous length range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub chains: Vec<ChainSample>,
    /// `(length, chains of that length)` for every length in the cohort's range.
    pub buckets: Vec<(usize, usize)>,
    /// Mean of the bucket counts; `None` for an empty cohort.
    pub mean_bucket_count: Option<f64>,
}

impl Cohort {
    fn build(chains: Vec<ChainSample>, range: std::ops::RangeInclusive<usize>) -> Self {
        if chains.is_empty() {
            return Self {
                chains,
                buckets: Vec::new(),
                mean_bucket_count: None,
            };
        }
        let buckets: Vec<(usize, usize)> = range
            .map(|len| (len, chains.iter().filter(|c| c.length == len).count()))
            .collect();
        let mean = buckets.iter().map(|(_, n)| *n as f64).sum::<f64>() / buckets.len() as f64;
        Self {
            chains,
            buckets,
            mean_bucket_count: Some(mean),
        }
    }

    pub fn bucket_counts(&self) -> Vec<f64> {
        self.buckets.iter().map(|(_, n)| *n as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSplit {
    pub threshold: usize,
    /// Lengths `<= threshold`, bucketed over `floor..=threshold`.
    pub low: Cohort,
    /// Lengths `> threshold`, bucketed over `threshold+1..=max observed`.
    pub high: Cohort,
}

impl CohortSplit {
    pub fn low_mean_bucket_count(&self) -> Option<f64> {
        self.low.mean_bucket_count
    }

    pub fn high_mean_bucket_count(&self) -> Option<f64> {
        self.high.mean_bucket_count
    }
}

/// Splits at `threshold` with the low buckets starting at [`DEFAULT_MIN_LENGTH`].
pub fn split_by_length(chains: &[ChainSample], threshold: usize) -> CohortSplit {
    split_by_length_from(chains, threshold, DEFAULT_MIN_LENGTH)
}

/// As [`split_by_length`], with the first low bucket at `floor`, or lower if a
/// shorter chain is present so that every chain falls in some bucket.
pub fn split_by_length_from(chains: &[ChainSample], threshold: usize, floor: usize) -> CohortSplit {
    let (low, high): (Vec<ChainSample>, Vec<ChainSample>) = chains.iter().cloned().partition(|c| c.length <= threshold);
    let low_floor = low.iter().map(|c| c.length).min().map_or(floor, |m| m.min(floor));
    let high_max = high.iter().map(|c| c.length).max().unwrap_or(threshold);
    CohortSplit {
        threshold,
        low: Cohort::build(low, low_floor..=threshold),
        high: Cohort::build(high, threshold + 1..=high_max),
    }
}

/// Story tallies of every chain in the cohort, pooled. Chains missing from
/// `tallies` contribute nothing.
pub fn pooled_tallies(cohort: &Cohort, tallies: &HashMap<ChainId, Vec<u64>>) -> Vec<f64> {
    cohort
        .chains
        .iter()
        .flat_map(|c| tallies.get(&c.chain_id).into_iter().flatten())
        .map(|&t| t as f64)
        .collect()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Mean story tally in the low and high cohorts.
pub fn group_vote_means(split: &CohortSplit, tallies: &HashMap<ChainId, Vec<u64>>) -> (Option<f64>, Option<f64>) {
    (
        mean(&pooled_tallies(&split.low, tallies)),
        mean(&pooled_tallies(&split.high, tallies)),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyticsConfig {
    pub threshold: usize,
    pub min_length: usize,
    pub variant: TTestVariant,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            min_length: DEFAULT_MIN_LENGTH,
            variant: TTestVariant::StudentPooled,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestReport {
    Computed(TTestResult),
    Unavailable { reason: String },
}

impl TestReport {
    fn from_result(r: Result<TTestResult, StatsError>) -> Self {
        match r {
            Ok(t) => TestReport::Computed(t),
            Err(e) => TestReport::Unavailable { reason: e.to_string() },
        }
    }

    pub fn result(&self) -> Option<&TTestResult> {
        match self {
            TestReport::Computed(t) => Some(t),
            TestReport::Unavailable { .. } => None,
        }
    }
}

/// The full length/vote analysis over one store snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsSummary {
    pub config: AnalyticsConfig,
    pub lengths: LengthSummary,
    pub split: CohortSplit,
    pub story_count: usize,
    pub mean_votes_per_story: Option<f64>,
    pub low_vote_mean: Option<f64>,
    pub high_vote_mean: Option<f64>,
    /// Low vs high per-length bucket counts.
    pub length_test: TestReport,
    /// Low vs high story tallies.
    pub vote_test: TestReport,
}

/// Analyses a list of chains (lengths) together with each chain's story tallies.
pub fn analyze(
    chains: &[ChainSample],
    tallies: &HashMap<ChainId, Vec<u64>>,
    config: &AnalyticsConfig,
) -> AnalyticsSummary {
    let population: Vec<ChainSample> = chains
        .iter()
        .filter(|c| c.length >= config.min_length)
        .cloned()
        .collect();
    let lengths = length_summary(population.iter().map(|c| c.length));
    let split = split_by_length_from(&population, config.threshold, config.min_length);
    let low_votes = pooled_tallies(&split.low, tallies);
    let high_votes = pooled_tallies(&split.high, tallies);
    let all_votes: Vec<f64> = low_votes.iter().chain(&high_votes).copied().collect();
    let length_test = TestReport::from_result(two_sample_t_test(
        &split.low.bucket_counts(),
        &split.high.bucket_counts(),
        config.variant,
    ));
    let vote_test = TestReport::from_result(two_sample_t_test(&low_votes, &high_votes, config.variant));
    AnalyticsSummary {
        config: *config,
        lengths,
        story_count: all_votes.len(),
        mean_votes_per_story: mean(&all_votes),
        low_vote_mean: mean(&low_votes),
        high_vote_mean: mean(&high_votes),
        split,
        length_test,
        vote_test,
    }
}

/// Story tallies grouped by chain, for [`analyze`].
pub fn chain_tallies(platform: &Platform) -> HashMap<ChainId, Vec<u64>> {
    let mut out: HashMap<ChainId, Vec<u64>> = HashMap::new();
    for s in platform.stories().all() {
        out.entry(s.chain_id.clone())
            .or_default()
            .push(platform.votes().tally(s.story_id));
    }
    out
}

pub fn analyze_platform(platform: &Platform, config: &AnalyticsConfig) -> AnalyticsSummary {
    let chains: Vec<ChainSample> = platform.chains().chains().iter().map(ChainSample::from).collect();
    analyze(&chains, &chain_tallies(platform), config)
}

fn fmt_value(v: Option<f64>) -> String {
    match v {
        None => "NA".to_owned(),
        Some(v) => {
            let s = format!("{v:.3}");
            s.trim_end_matches('0').trim_end_matches('.').to_owned()
        }
    }
}

impl AnalyticsSummary {
    /// Six-row tab-separated table of the headline quantities.
    pub fn to_table(&self) -> String {
        let t = self.config.threshold;
        let rows = [
            ("Average length of Image Chains".to_owned(), self.lengths.mean_length),
            (
                format!("Average number of Image chains of length <= {t}"),
                self.split.low_mean_bucket_count(),
            ),
            (
                format!("Average number of Image Chains of length > {t}"),
                self.split.high_mean_bucket_count(),
            ),
            (
                "Average number of votes for a story text".to_owned(),
                self.mean_votes_per_story,
            ),
            (
                format!("Average votes for story texts for Image Chains of length <= {t}"),
                self.low_vote_mean,
            ),
            (
                format!("Average votes for story texts for Image Chains of length > {t}"),
                self.high_vote_mean,
            ),
        ];
        let mut out = String::from("quantity\tvalue\n");
        for (label, value) in rows {
            let _ = writeln!(out, "{label}\t{}", fmt_value(value));
        }
        out
    }
}
