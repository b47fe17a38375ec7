//! HTTP service over the chainstory store.
//!
//! Every mutating route requires `Authorization: Bearer <token>`, where the
//! token comes from `POST /workers`. Failures are JSON of the form
//! `{"error": {"code": "UNKNOWN_CHAIN", "message": "..."}}`.

pub mod config;
pub mod error;
pub mod handlers;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use chainstory_core::analytics::AnalyticsConfig;
use chainstory_core::{Error, LeaderboardWeights, Store};
use tokio::net::TcpListener;

pub use config::Config;
pub use error::ApiError;

/// Largest accepted request body, in bytes.
pub const MAX_REQUEST_BYTES: usize = 32 * 1024 * 1024;

/// Every route the service exposes, as (method, path). Nothing here deletes
/// or overwrites; content only accumulates.
pub const ROUTES: &[(&str, &str)] = &[
    ("POST", "/workers"),
    ("POST", "/images"),
    ("GET", "/images"),
    ("GET", "/images/{id}"),
    ("GET", "/images/{id}/blob"),
    ("POST", "/chains"),
    ("GET", "/chains"),
    ("POST", "/chains/merge"),
    ("GET", "/chains/{id}"),
    ("POST", "/chains/{id}/extend"),
    ("POST", "/chains/{id}/branch"),
    ("POST", "/chains/{id}/stories"),
    ("GET", "/chains/{id}/stories"),
    ("GET", "/stories/{id}"),
    ("POST", "/stories/{id}/vote"),
    ("GET", "/recommendations"),
    ("GET", "/leaderboard"),
    ("GET", "/analytics/summary"),
];

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub weights: LeaderboardWeights,
    pub smoothing: f64,
    pub analytics: AnalyticsConfig,
}

impl AppState {
    pub fn new(store: Arc<Store>, config: &Config) -> Self {
        Self {
            store,
            weights: config.weights(),
            smoothing: config.smoothing,
            analytics: config.analytics(),
        }
    }
}

pub fn router(state: AppState) -> Router {
    use handlers::*;
    Router::new()
        .route("/workers", post(register_worker))
        .route("/images", post(upload_image).get(list_images))
        .route("/images/{id}", get(get_image))
        .route("/images/{id}/blob", get(get_image_blob))
        .route("/chains", post(start_chain).get(list_chains))
        .route("/chains/merge", post(merge_chains))
        .route("/chains/{id}", get(get_chain))
        .route("/chains/{id}/extend", post(extend_chain))
        .route("/chains/{id}/branch", post(branch_chain))
        .route("/chains/{id}/stories", post(submit_story).get(list_stories))
        .route("/stories/{id}", get(get_story))
        .route("/stories/{id}/vote", post(vote_story))
        .route("/recommendations", get(recommendations))
        .route("/leaderboard", get(leaderboard))
        .route("/analytics/summary", get(analytics_summary))
        .layer(DefaultBodyLimit::max(MAX_REQUEST_BYTES))
        .with_state(state)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("refusing to start: {0}")]
    CorruptLog(Error),
    #[error("cannot open data directory: {0}")]
    Store(Error),
    #[error("port in use: {0}")]
    PortInUse(SocketAddr),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A service bound to its listen address but not yet accepting requests.
pub struct Bound {
    pub listener: TcpListener,
    pub app: Router,
    pub state: AppState,
}

impl Bound {
    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub async fn run(self, shutdown: impl std::future::Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
        axum::serve(self.listener, self.app)
            .with_graceful_shutdown(shutdown)
            .await
    }
}

/// Replays the event log and binds the listen address.
pub async fn bind(config: &Config) -> Result<Bound, ServeError> {
    config.validate().map_err(ServeError::Config)?;
    let dir = config.data_dir.clone();
    let store = tokio::task::spawn_blocking(move || Store::open_dir_system_clock(&dir))
        .await
        .map_err(|e| ServeError::Io(std::io::Error::other(e)))?
        .map_err(|e| match e {
            Error::CorruptLog { .. } => ServeError::CorruptLog(e),
            other => ServeError::Store(other),
        })?;
    let listener = TcpListener::bind(config.listen).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServeError::PortInUse(config.listen),
        _ => ServeError::Io(e),
    })?;
    let state = AppState::new(Arc::new(store), config);
    Ok(Bound {
        listener,
        app: router(state.clone()),
        state,
    })
}
