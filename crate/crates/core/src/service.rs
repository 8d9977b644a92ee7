// SPDX-License-Identifier: Apache-2.0

//! HTTP+JSON search service over an immutable index snapshot.
//!
//! Routes: `POST /v1/search`, `GET /v1/images/{id}/meta`,
//! `GET /v1/images/{id}/file`, `GET /v1/stats`, `POST /v1/admin/reload`.
//! Readers clone an `Arc` of the current snapshot; reload builds a new
//! snapshot off to the side and swaps it in.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::analysis::{tokenize, AnalyzerConfig};
use crate::caption::{load_captions, CaptionDocument, CaptionError};
use crate::dataset::{load_jsonl, Dataset, DatasetError, ImageRecord};
use crate::index::{load_index, IndexError, InvertedIndex};
use crate::query::compose_query;

pub const DEFAULT_K: i64 = 20;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("index: {0}")]
    Index(#[from] IndexError),
    #[error("captions: {0}")]
    Captions(#[from] CaptionError),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("invalid CORS origin `{0}`")]
    Cors(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Files a snapshot is loaded from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotSources {
    pub index: Option<PathBuf>,
    #[serde(default)]
    pub captions: Option<PathBuf>,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub sources: SnapshotSources,
    pub image_dir: Option<PathBuf>,
    /// Allowed origins; `*` allows any. Empty disables CORS headers.
    pub cors_origins: Vec<String>,
    /// Bearer token required by the reload endpoint, if set.
    pub admin_token: Option<String>,
}

/// Everything a request reads; never mutated once built.
pub struct Snapshot {
    pub index: InvertedIndex,
    captions: HashMap<String, CaptionDocument>,
    records: HashMap<String, ImageRecord>,
}

impl Snapshot {
    pub fn new(index: InvertedIndex, captions: Vec<CaptionDocument>, dataset: Option<Dataset>) -> Self {
        Self {
            index,
            captions: captions.into_iter().map(|d| (d.image_id.clone(), d)).collect(),
            records: dataset
                .map(|d| d.records().iter().map(|r| (r.image_id.clone(), r.clone())).collect())
                .unwrap_or_default(),
        }
    }

    pub fn load(sources: &SnapshotSources) -> Result<Option<Self>, ServiceError> {
        let Some(index_path) = &sources.index else {
            return Ok(None);
        };
        let index = load_index(index_path)?;
        let captions = match &sources.captions {
            Some(p) => load_captions(p)?,
            None => Vec::new(),
        };
        let dataset = sources.dataset.as_ref().map(load_jsonl).transpose()?;
        Ok(Some(Self::new(index, captions, dataset)))
    }

    fn caption_texts(&self, image_id: &str) -> Vec<&str> {
        if let Some(doc) = self.captions.get(image_id) {
            doc.per_source.iter().map(|s| s.text.as_str()).collect()
        } else if let Some(r) = self.records.get(image_id) {
            r.captions.iter().map(String::as_str).collect()
        } else {
            Vec::new()
        }
    }

    /// First caption sentence whose terms include one of `matched`.
    pub fn snippet(&self, image_id: &str, matched: &[String]) -> Option<String> {
        let analyzer = self.index.analyzer();
        self.caption_texts(image_id)
            .into_iter()
            .flat_map(split_sentences)
            .find(|s| tokenize(s, analyzer).iter().any(|t| matched.iter().any(|m| m == t)))
            .map(str::to_owned)
    }

    pub fn search(&self, req: &SearchRequest) -> Result<SearchResponse, ApiError> {
        let (query, k) = req.validate()?;
        let ranked = self.index.search(&query, k).map_err(|e| ApiError::bad_request(e.to_string()))?;
        let terms: Vec<&str> = ranked.query_terms.unique();
        let results = ranked
            .hits
            .iter()
            .map(|h| {
                let image_id = self.index.image_id(h.doc).unwrap_or_default().to_owned();
                let matched_terms: Vec<String> = terms
                    .iter()
                    .filter(|t| self.index.term_freq(t, h.doc) > 0)
                    .map(|t| (*t).to_owned())
                    .collect();
                let caption_snippet = self.snippet(&image_id, &matched_terms);
                SearchHit {
                    image_id,
                    score: h.score,
                    matched_terms,
                    caption_snippet,
                }
            })
            .collect();
        Ok(SearchResponse {
            results,
            total_candidates: ranked.total_hits,
            query_echo: query,
        })
    }

    pub fn meta(&self, image_id: &str) -> Option<ImageMeta> {
        let doc = self.index.doc_for(image_id);
        let captions = self.captions.get(image_id).cloned();
        let record = self.records.get(image_id);
        if doc.is_none() && captions.is_none() && record.is_none() {
            return None;
        }
        Some(ImageMeta {
            image_id: image_id.to_owned(),
            indexed: doc.is_some(),
            doc_len: doc.and_then(|d| self.index.doc_len(d)),
            labels: record.map(|r| r.labels.clone()).unwrap_or_default(),
            path: record.map(|r| r.path.clone()).filter(|p| !p.is_empty()),
            captions,
        })
    }

    pub fn stats(&self) -> Stats {
        Stats {
            n_docs: self.index.n_docs(),
            n_terms: self.index.n_terms(),
            avgdl: self.index.avgdl(),
            total_tokens: self.index.total_tokens(),
            analyzer: *self.index.analyzer(),
            n_caption_documents: self.captions.len(),
            n_dataset_records: self.records.len(),
        }
    }
}

fn split_sentences(text: &str) -> impl Iterator<Item = &str> {
    text.split_inclusive(['.', '!', '?', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRequest {
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub free_text: Option<String>,
    #[serde(default = "default_k")]
    pub k: i64,
}

fn default_k() -> i64 {
    DEFAULT_K
}

impl SearchRequest {
    /// The composed query string and `k`, or a 400 error.
    pub fn validate(&self) -> Result<(String, usize), ApiError> {
        if self.k < 1 {
            return Err(ApiError::bad_request("k must be at least 1"));
        }
        let query = compose_query(self.free_text.as_deref().unwrap_or(""), &self.keywords);
        if query.is_empty() {
            return Err(ApiError::bad_request("empty query"));
        }
        Ok((query, usize::try_from(self.k).unwrap_or(usize::MAX)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub image_id: String,
    pub score: f64,
    pub matched_terms: Vec<String>,
    pub caption_snippet: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub results: Vec<SearchHit>,
    pub total_candidates: usize,
    pub query_echo: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub image_id: String,
    pub indexed: bool,
    pub doc_len: Option<u32>,
    pub labels: Vec<String>,
    pub path: Option<String>,
    pub captions: Option<CaptionDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n_docs: usize,
    pub n_terms: usize,
    pub avgdl: f64,
    pub total_tokens: u64,
    pub analyzer: AnalyzerConfig,
    pub n_caption_documents: usize,
    pub n_dataset_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReloadAck {
    pub reloaded: bool,
    pub n_docs: usize,
    pub sources: SnapshotSources,
}

/// JSON error body `{"error": {"code": .., "message": ..}}` with a status.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn no_index() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "no_index", "no index loaded")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

pub struct AppState {
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    /// Held for the duration of a reload; also records the current sources.
    reload: tokio::sync::Mutex<SnapshotSources>,
    image_dir: Option<PathBuf>,
    admin_token: Option<String>,
}

impl AppState {
    /// Load the configured sources (if any) and build the state.
    pub fn load(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let snapshot = Snapshot::load(&config.sources)?;
        Ok(Self::with_snapshot(config, snapshot))
    }

    pub fn with_snapshot(config: &ServiceConfig, snapshot: Option<Snapshot>) -> Self {
        Self {
            snapshot: RwLock::new(snapshot.map(Arc::new)),
            reload: tokio::sync::Mutex::new(config.sources.clone()),
            image_dir: config.image_dir.clone(),
            admin_token: config.admin_token.clone(),
        }
    }

    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn require(&self) -> Result<Arc<Snapshot>, ApiError> {
        self.current().ok_or_else(ApiError::no_index)
    }

    fn swap(&self, snapshot: Snapshot) {
        *self.snapshot.write().expect("snapshot lock") = Some(Arc::new(snapshot));
    }
}

pub fn router(state: Arc<AppState>, cors_origins: &[String]) -> Result<Router, ServiceError> {
    let router = Router::new()
        .route("/v1/search", post(handle_search))
        .route("/v1/images/{id}/meta", get(handle_meta))
        .route("/v1/images/{id}/file", get(handle_file))
        .route("/v1/stats", get(handle_stats))
        .route("/v1/admin/reload", post(handle_reload))
        .with_state(state);
    if cors_origins.is_empty() {
        return Ok(router);
    }
    let origins = if cors_origins.iter().any(|o| o == "*") {
        AllowOrigin::from(Any)
    } else {
        let list = cors_origins
            .iter()
            .map(|o| HeaderValue::from_str(o).map_err(|_| ServiceError::Cors(o.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        AllowOrigin::list(list)
    };
    let cors = CorsLayer::new()
        .allow_origin(origins)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION]);
    Ok(router.layer(cors))
}

/// Bind and serve until ctrl-c.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let state = Arc::new(AppState::load(&config)?);
    let app = router(state, &config.cors_origins)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn handle_search(
    State(state): State<Arc<AppState>>,
    body: Result<Json<SearchRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<SearchResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    req.validate()?;
    let snapshot = state.require()?;
    snapshot.search(&req).map(Json)
}

async fn handle_meta(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<ImageMeta>, ApiError> {
    let snapshot = state.require()?;
    snapshot
        .meta(&id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("unknown image `{id}`")))
}

const IMAGE_EXTENSIONS: [&str; 4] = ["jpg", "jpeg", "png", "webp"];

fn safe_relative(p: &str) -> Option<&Path> {
    let path = Path::new(p);
    path.components()
        .all(|c| matches!(c, Component::Normal(_)))
        .then_some(path)
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("png") => "image/png",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
}

async fn handle_file(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let missing = || ApiError::not_found(format!("no image file for `{id}`"));
    let dir = state.image_dir.as_ref().ok_or_else(missing)?;
    let snapshot = state.current();
    let mut candidates = Vec::new();
    if let Some(rec) = snapshot.as_ref().and_then(|s| s.records.get(&id)) {
        if let Some(rel) = safe_relative(&rec.path) {
            candidates.push(dir.join(rel));
        }
    }
    if safe_relative(&id).is_some() {
        candidates.extend(IMAGE_EXTENSIONS.iter().map(|ext| dir.join(format!("{id}.{ext}"))));
    }
    for path in candidates {
        if let Ok(bytes) = tokio::fs::read(&path).await {
            return Ok(([(header::CONTENT_TYPE, content_type(&path))], Body::from(bytes)).into_response());
        }
    }
    Err(missing())
}

async fn handle_stats(State(state): State<Arc<AppState>>) -> Result<Json<Stats>, ApiError> {
    Ok(Json(state.require()?.stats()))
}

/// Optional body overriding any of the configured source paths.
#[derive(Debug, Default, Deserialize)]
struct ReloadRequest {
    index: Option<PathBuf>,
    captions: Option<PathBuf>,
    dataset: Option<PathBuf>,
}

async fn handle_reload(State(state): State<Arc<AppState>>, headers: HeaderMap, body: String) -> Result<Json<ReloadAck>, ApiError> {
    if let Some(token) = &state.admin_token {
        let given = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "admin token required"));
        }
    }
    let req: ReloadRequest = if body.trim().is_empty() {
        ReloadRequest::default()
    } else {
        serde_json::from_str(&body).map_err(|e| ApiError::bad_request(e.to_string()))?
    };
    let Ok(mut sources) = state.reload.try_lock() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "reload_in_progress", "a reload is already running"));
    };
    let next = SnapshotSources {
        index: req.index.or_else(|| sources.index.clone()),
        captions: req.captions.or_else(|| sources.captions.clone()),
        dataset: req.dataset.or_else(|| sources.dataset.clone()),
    };
    if next.index.is_none() {
        return Err(ApiError::bad_request("no index path configured"));
    }
    let to_load = next.clone();
    let loaded = tokio::task::spawn_blocking(move || Snapshot::load(&to_load))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "load_failed", e.to_string()))?
        .expect("index path checked above");
    let n_docs = loaded.index.n_docs();
    state.swap(loaded);
    *sources = next.clone();
    log::info!("reloaded index with {n_docs} documents");
    Ok(Json(ReloadAck {
        reloaded: true,
        n_docs,
        sources: next,
    }))
}
