use std::str::FromStr;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Multipart, Path, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use chainstory_core::analytics::{analyze_platform, AnalyticsSummary};
use chainstory_core::recommend::{recommend_sampled, recommend_top};
use chainstory_core::{
    ChainFilter, ChainId, ChainOutcome, Error, ImageChain, ImageId, ImageOrigin, ImageRecord, Platform, Result, Store,
    StoryId, StoryOrdering, StoryText, VoteRecord, WorkerId, WorkerProfile,
};
use rand::RngCore;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};
use crate::AppState;

pub const DEFAULT_PAGE_LIMIT: usize = 50;
pub const MAX_PAGE_LIMIT: usize = 1000;
pub const DEFAULT_K: usize = 10;

/// JSON body whose rejections use the service error shape.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(json_rejection(e)),
        }
    }
}

fn json_rejection(e: JsonRejection) -> ApiError {
    ApiError::new(e.status(), "INVALID_BODY", e.body_text())
}

/// Query string whose rejections use the service error shape.
pub struct Q<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Q<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|q| Q(q.0))
            .map_err(|e: QueryRejection| ApiError::bad_request("INVALID_QUERY", e.body_text()))
    }
}

/// The worker named by a valid `Authorization: Bearer <token>` header.
pub struct Auth(pub WorkerId);

impl FromRequestParts<AppState> for Auth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let value = parts
            .headers
            .get(header::AUTHORIZATION)
            .ok_or_else(|| ApiError::unauthorized("missing bearer token"))?;
        let token = value
            .to_str()
            .ok()
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| ApiError::unauthorized("malformed authorization header"))?;
        state
            .store
            .authenticate(token)
            .map(Auth)
            .ok_or_else(|| ApiError::unauthorized("unknown token"))
    }
}

fn parse_id<T: FromStr<Err = Error>>(raw: &str) -> ApiResult<T> {
    raw.parse().map_err(ApiError::from)
}

/// Runs a store mutation off the async executor; commits fsync the log.
async fn blocking<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Store) -> Result<T> + Send + 'static,
{
    let store = state.store.clone();
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError::internal(format!("commit task failed: {e}")))?
        .map_err(ApiError::from)
}

#[derive(Debug, Default, Deserialize)]
pub struct PageQuery {
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
}

impl<T> Page<T> {
    fn of<I: ExactSizeIterator<Item = T>>(all: I, q: &PageQuery) -> Self {
        let offset = q.offset.unwrap_or(0);
        let limit = q.limit.unwrap_or(DEFAULT_PAGE_LIMIT).min(MAX_PAGE_LIMIT);
        let total = all.len();
        Page {
            items: all.skip(offset).take(limit).collect(),
            total,
            offset,
            limit,
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct RegisterRequest {
    pub display_name: String,
}

#[derive(Debug, Serialize)]
pub struct Registered {
    #[serde(flatten)]
    pub profile: WorkerProfile,
    /// Shown once; only its digest is stored.
    pub token: String,
}

pub async fn register_worker(
    State(state): State<AppState>,
    Body(req): Body<RegisterRequest>,
) -> ApiResult<(StatusCode, Json<Registered>)> {
    let mut raw = [0u8; 32];
    rand::rng().fill_bytes(&mut raw);
    let token = hex::encode(raw);
    let issued = token.clone();
    let profile = blocking(&state, move |s| s.register_worker(&req.display_name, &issued)).await?;
    Ok((StatusCode::CREATED, Json(Registered { profile, token })))
}

#[derive(Debug, Serialize)]
pub struct ImageUploaded {
    #[serde(flatten)]
    pub image: ImageRecord,
    /// False when identical bytes were already in the pool.
    pub created: bool,
}

pub async fn upload_image(
    State(state): State<AppState>,
    Auth(worker): Auth,
    mut form: Multipart,
) -> ApiResult<(StatusCode, Json<ImageUploaded>)> {
    let mut blob: Option<Bytes> = None;
    let mut description: Option<String> = None;
    let mut origin = ImageOrigin::WorkerUpload;
    let bad_form =
        |e: axum::extract::multipart::MultipartError| ApiError::new(e.status(), "INVALID_FORM", e.body_text());
    while let Some(field) = form.next_field().await.map_err(bad_form)? {
        match field.name() {
            Some("blob") => blob = Some(field.bytes().await.map_err(bad_form)?),
            Some("description") => description = Some(field.text().await.map_err(bad_form)?),
            Some("origin") => {
                origin = match field.text().await.map_err(bad_form)?.as_str() {
                    "worker_upload" => ImageOrigin::WorkerUpload,
                    "base_pool" => ImageOrigin::BasePool,
                    other => {
                        return Err(ApiError::bad_request(
                            "INVALID_FORM",
                            format!("unknown origin {other:?}"),
                        ));
                    }
                }
            }
            _ => {}
        }
    }
    let blob = blob.ok_or_else(|| ApiError::bad_request("INVALID_FORM", "missing blob field"))?;
    let description = description.ok_or_else(|| ApiError::bad_request("INVALID_FORM", "missing description field"))?;
    let (image, created) = blocking(&state, move |s| {
        s.add_image_with_origin(&blob, &description, worker, origin)
    })
    .await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(ImageUploaded { image, created })))
}

pub async fn list_images(State(state): State<AppState>, Q(q): Q<PageQuery>) -> Json<Page<ImageRecord>> {
    Json(state.store.read(|p| Page::of(p.chains().images().iter().cloned(), &q)))
}

pub async fn get_image(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ImageRecord>> {
    let id: ImageId = parse_id(&id)?;
    state
        .store
        .read(|p| p.image(&id).cloned())
        .map(Json)
        .ok_or_else(|| Error::UnknownImage(id).into())
}

pub async fn get_image_blob(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id: ImageId = parse_id(&id)?;
    if state.store.read(|p| p.image(&id).is_none()) {
        return Err(Error::UnknownImage(id).into());
    }
    let lookup = id.clone();
    let bytes = blocking(&state, move |s| s.blob(&lookup))
        .await?
        .ok_or_else(|| ApiError::internal(format!("blob for image {id} is missing")))?;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
}

#[derive(Debug, Serialize)]
pub struct ChainView {
    #[serde(flatten)]
    pub chain: ImageChain,
    /// Implicit votes plus active story votes.
    pub score: u64,
    /// Story texts written against this chain, all versions.
    pub story_count: usize,
}

fn chain_view(p: &Platform, chain: &ImageChain) -> ChainView {
    ChainView {
        chain: chain.clone(),
        score: p.chain_score(&chain.chain_id).expect("chain comes from the platform"),
        story_count: p.stories().on_chain(&chain.chain_id).count(),
    }
}

fn chain_response(outcome: ChainOutcome) -> (StatusCode, Json<ChainOutcome>) {
    let status = if outcome.is_created() {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    (status, Json(outcome))
}

#[derive(Debug, Deserialize)]
pub struct StartRequest {
    pub base_image_id: ImageId,
}

pub async fn start_chain(
    State(state): State<AppState>,
    Auth(worker): Auth,
    Body(req): Body<StartRequest>,
) -> ApiResult<(StatusCode, Json<ChainOutcome>)> {
    let outcome = blocking(&state, move |s| s.start_chain(&req.base_image_id, worker)).await?;
    Ok(chain_response(outcome))
}

#[derive(Debug, Deserialize)]
pub struct ExtendRequest {
    pub images: Vec<ImageId>,
}

pub async fn extend_chain(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Auth(worker): Auth,
    Body(req): Body<ExtendRequest>,
) -> ApiResult<(StatusCode, Json<ChainOutcome>)> {
    let parent: ChainId = parse_id(&id)?;
    let outcome = blocking(&state, move |s| s.extend_chain(&parent, &req.images, worker)).await?;
    Ok(chain_response(outcome))
}

#[derive(Debug, Deserialize)]
pub struct BranchRequest {
    pub prefix_len: usize,
    pub images: Vec<ImageId>,
}

pub async fn branch_chain(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Auth(worker): Auth,
    Body(req): Body<BranchRequest>,
) -> ApiResult<(StatusCode, Json<ChainOutcome>)> {
    let parent: ChainId = parse_id(&id)?;
    let outcome = blocking(&state, move |s| {
        s.branch_chain(&parent, req.prefix_len, &req.images, worker)
    })
    .await?;
    Ok(chain_response(outcome))
}

#[derive(Debug, Deserialize)]
pub struct MergeRequest {
    pub first: ChainId,
    pub second: ChainId,
}

pub async fn merge_chains(
    State(state): State<AppState>,
    Auth(worker): Auth,
    Body(req): Body<MergeRequest>,
) -> ApiResult<(StatusCode, Json<ChainOutcome>)> {
    let outcome = blocking(&state, move |s| s.merge_chains(&req.first, &req.second, worker)).await?;
    Ok(chain_response(outcome))
}

#[derive(Debug, Default, Deserialize)]
pub struct ChainQuery {
    pub min_len: Option<usize>,
    pub max_len: Option<usize>,
    pub containing_image: Option<String>,
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

pub async fn list_chains(State(state): State<AppState>, Q(q): Q<ChainQuery>) -> ApiResult<Json<Page<ChainView>>> {
    let filter = ChainFilter {
        min_len: q.min_len,
        max_len: q.max_len,
        containing_image: q.containing_image.as_deref().map(parse_id).transpose()?,
    };
    Ok(Json(state.store.read(|p| {
        let chains = p.list_chains(&filter);
        let page = PageQuery {
            offset: q.offset,
            limit: q.limit,
        };
        Page::of(chains.into_iter().map(|c| chain_view(p, c)), &page)
    })))
}

pub async fn get_chain(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ChainView>> {
    let id: ChainId = parse_id(&id)?;
    state
        .store
        .read(|p| p.chain(&id).map(|c| chain_view(p, c)))
        .map(Json)
        .ok_or_else(|| Error::UnknownChain(id).into())
}

#[derive(Debug, Serialize)]
pub struct StoryView {
    #[serde(flatten)]
    pub story: StoryText,
    /// Active explicit votes.
    pub votes: u64,
}

fn story_view(p: &Platform, story: &StoryText) -> StoryView {
    StoryView {
        story: story.clone(),
        votes: p.votes().tally(story.story_id),
    }
}

#[derive(Debug, Deserialize)]
pub struct StoryRequest {
    pub body: String,
    #[serde(default)]
    pub derived_from: Option<StoryId>,
}

pub async fn submit_story(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Auth(worker): Auth,
    Body(req): Body<StoryRequest>,
) -> ApiResult<(StatusCode, Json<StoryView>)> {
    let chain: ChainId = parse_id(&id)?;
    let story = blocking(&state, move |s| {
        s.submit_story(&chain, worker, &req.body, req.derived_from)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(StoryView { story, votes: 0 })))
}

#[derive(Debug, Default, Deserialize)]
pub struct StoryQuery {
    #[serde(default)]
    pub ordering: StoryOrdering,
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

pub async fn list_stories(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Q(q): Q<StoryQuery>,
) -> ApiResult<Json<Page<StoryView>>> {
    let chain: ChainId = parse_id(&id)?;
    let page = state.store.read(|p| {
        let stories = p.list_stories(&chain, q.ordering)?;
        let page = PageQuery {
            offset: q.offset,
            limit: q.limit,
        };
        Ok::<_, Error>(Page::of(stories.into_iter().map(|s| story_view(p, s)), &page))
    })?;
    Ok(Json(page))
}

pub async fn get_story(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<StoryView>> {
    let id: StoryId = parse_id(&id)?;
    state
        .store
        .read(|p| p.story(id).map(|s| story_view(p, s)))
        .map(Json)
        .ok_or_else(|| Error::UnknownStory(id).into())
}

pub async fn vote_story(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Auth(worker): Auth,
) -> ApiResult<Json<VoteRecord>> {
    let story: StoryId = parse_id(&id)?;
    Ok(Json(blocking(&state, move |s| s.vote_story(story, worker)).await?))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendMode {
    #[default]
    Top,
    Sampled,
}

#[derive(Debug, Default, Deserialize)]
pub struct RecommendQuery {
    #[serde(default)]
    pub mode: RecommendMode,
    pub k: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct RecommendedChain {
    pub chain: ImageChain,
    pub score: u64,
    /// Highest-voted story, only in top mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub story: Option<StoryText>,
}

#[derive(Debug, Serialize)]
pub struct Recommendations {
    pub mode: RecommendMode,
    /// The seed used, in sampled mode; fresh when none was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub items: Vec<RecommendedChain>,
}

pub async fn recommendations(State(state): State<AppState>, Q(q): Q<RecommendQuery>) -> Json<Recommendations> {
    let k = q.k.unwrap_or(DEFAULT_K);
    let body = match q.mode {
        RecommendMode::Top => Recommendations {
            mode: q.mode,
            seed: None,
            items: state.store.read(|p| {
                recommend_top(p, k)
                    .into_iter()
                    .map(|r| RecommendedChain {
                        chain: r.chain.clone(),
                        score: r.score,
                        story: r.story.cloned(),
                    })
                    .collect()
            }),
        },
        RecommendMode::Sampled => {
            let seed = q.seed.unwrap_or_else(|| rand::rng().next_u64());
            Recommendations {
                mode: q.mode,
                seed: Some(seed),
                items: state.store.read(|p| {
                    recommend_sampled(p, k, seed, state.smoothing)
                        .into_iter()
                        .map(|c| RecommendedChain {
                            chain: c.clone(),
                            score: p.chain_score(&c.chain_id).expect("sampled chain exists"),
                            story: None,
                        })
                        .collect()
                }),
            }
        }
    };
    Json(body)
}

#[derive(Debug, Default, Deserialize)]
pub struct LeaderboardQuery {
    pub k: Option<usize>,
}

pub async fn leaderboard(State(state): State<AppState>, Q(q): Q<LeaderboardQuery>) -> Json<serde_json::Value> {
    let k = q.k.unwrap_or(DEFAULT_K);
    let entries = state.store.read(|p| p.leaderboard(k, &state.weights));
    Json(serde_json::json!({ "weights": state.weights, "entries": entries }))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryFormat {
    #[default]
    Json,
    Tsv,
}

#[derive(Debug, Default, Deserialize)]
pub struct SummaryQuery {
    #[serde(default)]
    pub format: SummaryFormat,
    pub threshold: Option<usize>,
    pub min_length: Option<usize>,
}

pub async fn analytics_summary(State(state): State<AppState>, Q(q): Q<SummaryQuery>) -> ApiResult<Response> {
    let mut config = state.analytics;
    if let Some(t) = q.threshold {
        config.threshold = t;
    }
    if let Some(m) = q.min_length {
        config.min_length = m;
    }
    if config.threshold == 0 || config.min_length == 0 {
        return Err(ApiError::bad_request(
            "INVALID_QUERY",
            "threshold and min_length must be at least 1",
        ));
    }
    let summary: AnalyticsSummary = state.store.read(|p| analyze_platform(p, &config));
    Ok(match q.format {
        SummaryFormat::Json => Json(summary).into_response(),
        SummaryFormat::Tsv => (
            [(header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")],
            summary.to_table(),
        )
            .into_response(),
    })
}
