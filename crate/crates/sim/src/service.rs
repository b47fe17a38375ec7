//! Concurrent simulation against a running service, one thread per worker.

use std::collections::HashSet;

use chainstory_core::analytics::AnalyticsSummary;
use chainstory_core::{ChainId, ChainOutcome, ImageChain, ImageId, ImageRecord, StoryId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reqwest::blocking::{multipart, Client, RequestBuilder};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::engine::{ActionCounts, Actor, Backend, ChainInfo};
use crate::{base_image, checks, BehaviorProfile, SimError, BASE_POOL_SIZE};

const PAGE: usize = 1000;

#[derive(Deserialize)]
struct Page<T> {
    items: Vec<T>,
    total: usize,
}

#[derive(Deserialize)]
struct ChainRow {
    #[serde(flatten)]
    chain: ImageChain,
    story_count: usize,
}

#[derive(Deserialize)]
struct StoryRow {
    story_id: StoryId,
}

#[derive(Deserialize)]
struct Registered {
    token: String,
}

#[derive(Clone)]
pub struct HttpBackend {
    client: Client,
    base: String,
    tokens: Vec<String>,
}

fn transport(e: reqwest::Error) -> SimError {
    if e.is_connect() || e.is_timeout() {
        SimError::TargetUnreachable(e.to_string())
    } else {
        SimError::Http(e.to_string())
    }
}

fn send<T: DeserializeOwned>(req: RequestBuilder) -> Result<T, SimError> {
    let resp = req.send().map_err(transport)?;
    let status = resp.status();
    if !status.is_success() {
        let body = resp.text().unwrap_or_default();
        return Err(SimError::Service {
            status: status.as_u16(),
            body,
        });
    }
    resp.json().map_err(|e| SimError::Http(e.to_string()))
}

impl HttpBackend {
    pub fn new(base: &str) -> Result<Self, SimError> {
        let client = Client::builder().build().map_err(|e| SimError::Http(e.to_string()))?;
        Ok(Self {
            client,
            base: base.trim_end_matches('/').to_owned(),
            tokens: Vec::new(),
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    fn post(&self, worker: usize, path: &str) -> RequestBuilder {
        self.client.post(self.url(path)).bearer_auth(&self.tokens[worker])
    }

    fn all_pages<T: DeserializeOwned>(&self, path: &str, extra: &[(&str, &str)]) -> Result<Vec<T>, SimError> {
        let mut out = Vec::new();
        loop {
            let offset = out.len().to_string();
            let limit = PAGE.to_string();
            let mut query = vec![("offset", offset.as_str()), ("limit", limit.as_str())];
            query.extend_from_slice(extra);
            let page: Page<T> = send(self.client.get(self.url(path)).query(&query))?;
            let done = page.items.is_empty() || out.len() + page.items.len() >= page.total;
            out.extend(page.items);
            if done {
                return Ok(out);
            }
        }
    }

    pub fn all_chains(&self) -> Result<Vec<ImageChain>, SimError> {
        Ok(self
            .all_pages::<ChainRow>("/chains", &[])?
            .into_iter()
            .map(|r| r.chain)
            .collect())
    }

    pub fn all_images(&self) -> Result<Vec<ImageRecord>, SimError> {
        self.all_pages("/images", &[])
    }

    pub fn register(&mut self, display_name: &str) -> Result<(), SimError> {
        let reg: Registered = send(
            self.client
                .post(self.url("/workers"))
                .json(&json!({ "display_name": display_name })),
        )?;
        self.tokens.push(reg.token);
        Ok(())
    }

    pub fn upload_base(&self, worker: usize, blob: Vec<u8>, description: String) -> Result<ImageId, SimError> {
        let form = multipart::Form::new()
            .part("blob", multipart::Part::bytes(blob).file_name("image.bin"))
            .text("description", description)
            .text("origin", "base_pool");
        let image: ImageRecord = send(self.post(worker, "/images").multipart(form))?;
        Ok(image.image_id)
    }

    pub fn summary(&self) -> Result<AnalyticsSummary, SimError> {
        send(self.client.get(self.url("/analytics/summary")))
    }
}

impl Backend for HttpBackend {
    fn chains(&mut self) -> Result<Vec<ChainInfo>, SimError> {
        Ok(self
            .all_pages::<ChainRow>("/chains", &[])?
            .into_iter()
            .map(|r| ChainInfo {
                len: r.chain.len(),
                chain_id: r.chain.chain_id,
                story_count: r.story_count,
            })
            .collect())
    }

    fn stories(&mut self, chain: &ChainId) -> Result<Vec<StoryId>, SimError> {
        Ok(self
            .all_pages::<StoryRow>(&format!("/chains/{chain}/stories"), &[("ordering", "by_time_asc")])?
            .into_iter()
            .map(|s| s.story_id)
            .collect())
    }

    fn start(&mut self, worker: usize, base: &ImageId) -> Result<ChainOutcome, SimError> {
        send(self.post(worker, "/chains").json(&json!({ "base_image_id": base })))
    }

    fn extend(&mut self, worker: usize, parent: &ChainId, images: &[ImageId]) -> Result<ChainOutcome, SimError> {
        send(
            self.post(worker, &format!("/chains/{parent}/extend"))
                .json(&json!({ "images": images })),
        )
    }

    fn branch(
        &mut self,
        worker: usize,
        parent: &ChainId,
        prefix_len: usize,
        images: &[ImageId],
    ) -> Result<ChainOutcome, SimError> {
        send(
            self.post(worker, &format!("/chains/{parent}/branch"))
                .json(&json!({ "prefix_len": prefix_len, "images": images })),
        )
    }

    fn merge(&mut self, worker: usize, first: &ChainId, second: &ChainId) -> Result<ChainOutcome, SimError> {
        send(
            self.post(worker, "/chains/merge")
                .json(&json!({ "first": first, "second": second })),
        )
    }

    fn submit(
        &mut self,
        worker: usize,
        chain: &ChainId,
        body: &str,
        derived_from: Option<StoryId>,
    ) -> Result<StoryId, SimError> {
        let story: StoryRow = send(
            self.post(worker, &format!("/chains/{chain}/stories"))
                .json(&json!({ "body": body, "derived_from": derived_from })),
        )?;
        Ok(story.story_id)
    }

    fn vote(&mut self, worker: usize, story: StoryId) -> Result<(), SimError> {
        send::<serde_json::Value>(self.post(worker, &format!("/stories/{story}/vote"))).map(|_| ())
    }
}

/// Per-worker RNG stream derived from the run seed.
fn worker_seed(seed: u64, worker: usize) -> u64 {
    seed ^ (worker as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub struct ServiceRun {
    pub counts: ActionCounts,
    pub summary: AnalyticsSummary,
}

/// Registers `workers` new workers, makes sure the base pool is present, then
/// lets every worker take its share of `steps` concurrently. Afterwards the
/// service's chains are scanned for uniqueness and vote conservation.
pub fn run(
    target: &str,
    workers: usize,
    steps: u64,
    seed: u64,
    profile: &BehaviorProfile,
) -> Result<ServiceRun, SimError> {
    let mut backend = HttpBackend::new(target)?;
    let before = backend.all_chains().map_err(|e| match e {
        SimError::Http(msg) | SimError::TargetUnreachable(msg) => SimError::TargetUnreachable(msg),
        other => other,
    })?;
    for i in 0..workers {
        backend.register(&format!("sim worker {}", i + 1))?;
    }
    let images = (0..BASE_POOL_SIZE)
        .map(|i| {
            let (blob, description) = base_image(i);
            backend.upload_base(0, blob, description)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let per_worker = steps / workers as u64;
    let extra = steps % workers as u64;
    let results: Vec<Result<ActionCounts, SimError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|i| {
                let mut backend = backend.clone();
                let images = images.clone();
                let profile = profile.clone();
                let my_steps = per_worker + u64::from((i as u64) < extra);
                scope.spawn(move || {
                    let mut actor = Actor::new(profile, images, ChaCha8Rng::seed_from_u64(worker_seed(seed, i)));
                    for _ in 0..my_steps {
                        actor.step(&mut backend, i)?;
                    }
                    Ok(actor.counts)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(SimError::Http("worker thread panicked".into())))
            })
            .collect()
    });
    let mut counts = ActionCounts::default();
    for r in results {
        counts.merge(&r?);
    }

    let after = backend.all_chains()?;
    let pool: HashSet<ImageId> = backend.all_images()?.into_iter().map(|i| i.image_id).collect();
    checks::check_chains(&after, &pool).map_err(SimError::InvariantViolation)?;
    checks::check_growth(&before, &after, &counts).map_err(SimError::InvariantViolation)?;
    Ok(ServiceRun {
        counts,
        summary: backend.summary()?,
    })
}
