//! HTTP JSON API over the session store.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lipread_core::quiz::{self, AttemptRecord, QuizError, QuizItemView, QuizSession, ScoreSummary, SessionState, SessionView};
use lipread_core::stats::McmcConfig;
use lipread_core::synth::{DatasetManifest, StatusCounts};
use lipread_core::{DatasetTag, Protocol};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower::ServiceExt;
use tower_http::services::ServeFile;

use crate::fsutil::now_ms;
use crate::report::{stats_report, Cohort, CompareOptions, CompareReport, ReportError, TestKind};
use crate::store::{Binding, NewSession, Store, StoreError};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path} is not a writable directory: {source}")]
    Root { path: PathBuf, source: std::io::Error },
    #[error("server failed: {0}")]
    Io(std::io::Error),
}

/// Error body: `{"code": ..., "message": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status: status.as_u16(), code: code.into(), message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<QuizError> for ApiError {
    fn from(e: QuizError) -> Self {
        let (status, code) = match &e {
            QuizError::InsufficientFreshLabels { .. } => (StatusCode::CONFLICT, "insufficient_fresh_labels"),
            QuizError::ManifestIncomplete { .. } => (StatusCode::CONFLICT, "manifest_incomplete"),
            QuizError::ProtocolMismatch { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "protocol_mismatch"),
            QuizError::UnknownLabel(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_label"),
            QuizError::OutOfOrderSubmission { .. } => (StatusCode::CONFLICT, "out_of_order_submission"),
            QuizError::DuplicateSubmission(_) => (StatusCode::CONFLICT, "duplicate_submission"),
            QuizError::SessionComplete => (StatusCode::CONFLICT, "session_complete"),
            QuizError::SessionIncomplete { .. } => (StatusCode::CONFLICT, "session_incomplete"),
            QuizError::UnknownItem(_) => (StatusCode::NOT_FOUND, "unknown_item"),
            QuizError::WrongSession(_) => (StatusCode::BAD_REQUEST, "wrong_session"),
            QuizError::Lexicon(_) => (StatusCode::UNPROCESSABLE_ENTITY, "lexicon_error"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Quiz(q) => q.into(),
            StoreError::UnknownSession(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_session", e.to_string()),
            StoreError::UnknownManifest(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_manifest", e.to_string()),
            StoreError::InvalidManifest(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_manifest", e.to_string()),
            StoreError::Io { .. } | StoreError::Corruption { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_error", e.to_string())
            }
        }
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::InsufficientData { .. } => ApiError::new(StatusCode::CONFLICT, "insufficient_data", e.to_string()),
            ReportError::Stats(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "stats_error", e.to_string()),
        }
    }
}

pub struct AppState {
    pub store: Store,
    /// Relative video paths in manifests are resolved against this directory.
    pub media_root: PathBuf,
    pub alpha: f64,
    /// Bearer token to user id. Empty disables authentication.
    pub tokens: BTreeMap<String, String>,
    /// Chain count and lengths for BEST comparisons; the seed comes from the request.
    pub mcmc: McmcConfig,
}

impl AppState {
    pub fn new(store: Store, media_root: PathBuf) -> Self {
        Self { store, media_root, alpha: 0.1, tokens: BTreeMap::new(), mcmc: McmcConfig::new(0) }
    }

    /// The user behind the request's bearer token, or `None` when authentication is off.
    fn caller(&self, headers: &HeaderMap) -> Result<Option<String>, ApiError> {
        if self.tokens.is_empty() {
            return Ok(None);
        }
        let token = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing bearer token"))?;
        self.tokens
            .get(token.trim())
            .cloned()
            .map(Some)
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "unknown token"))
    }

    fn owned_session(&self, headers: &HeaderMap, id: &str) -> Result<QuizSession, ApiError> {
        let caller = self.caller(headers)?;
        let s = self.store.session(id)?;
        match caller {
            Some(u) if u != s.user_id => Err(ApiError::new(StatusCode::FORBIDDEN, "forbidden", "session belongs to another user")),
            _ => Ok(s),
        }
    }
}

type Shared = Arc<AppState>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/manifests", post(register_manifest))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/next", get(next_item))
        .route("/sessions/{id}/answers", post(submit_answer))
        .route("/sessions/{id}/score", get(score))
        .route("/stats/compare", get(compare))
        .route("/videos/{id}", get(video))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(state)
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestUpload {
    pub dataset_tag: DatasetTag,
    pub manifest: DatasetManifest,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestRegistered {
    #[serde(flatten)]
    pub binding: Binding,
    pub counts: StatusCounts,
}

async fn register_manifest(State(st): State<Shared>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    st.caller(&headers)?;
    let upload: ManifestUpload = parse(&body)?;
    let out = blocking(move || {
        let counts = upload.manifest.counts();
        let binding = st.store.register_manifest(upload.dataset_tag, upload.manifest)?;
        Ok(ManifestRegistered { binding, counts })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

#[derive(Debug, Deserialize)]
struct CreateSessionBody {
    #[serde(default)]
    user_id: Option<String>,
    protocol: Protocol,
    dataset_tag: DatasetTag,
    #[serde(default)]
    manifest_id: Option<String>,
}

async fn create_session(State(st): State<Shared>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let caller = st.caller(&headers)?;
    let b: CreateSessionBody = parse(&body)?;
    let user_id = match (caller, b.user_id) {
        (Some(c), Some(u)) if c != u => return Err(ApiError::new(StatusCode::FORBIDDEN, "forbidden", "user_id does not match the token")),
        (Some(c), _) => c,
        (None, Some(u)) if !u.trim().is_empty() => u,
        (None, _) => return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "user_id is required")),
    };
    let req = NewSession { user_id, protocol: b.protocol, dataset_tag: b.dataset_tag, manifest_id: b.manifest_id };
    let s = blocking(move || Ok(st.store.create_session(req, now_ms())?)).await?;
    // Items are handed out one at a time by /next, so no response shows a
    // sentence that gives away the answer to a later item.
    Ok((StatusCode::CREATED, Json(s.view())).into_response())
}

async fn get_session(State(st): State<Shared>, headers: HeaderMap, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(st.owned_session(&headers, &id)?.view()))
}

/// The cursor item, or only the progress once the session is complete.
#[derive(Debug, Serialize, Deserialize)]
pub struct NextItem {
    pub state: SessionState,
    /// Items answered so far.
    pub answered: usize,
    pub total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<QuizItemView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_url: Option<String>,
}

async fn next_item(State(st): State<Shared>, headers: HeaderMap, Path(id): Path<String>) -> Result<Json<NextItem>, ApiError> {
    let s = st.owned_session(&headers, &id)?;
    let item = s.current_item().map(|i| i.view());
    let video_url = item.as_ref().map(|i| format!("/videos/{}", i.video_ref));
    Ok(Json(NextItem { state: s.state, answered: s.cursor, total: s.items.len(), item, video_url }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerBody {
    pub item_id: String,
    pub answer: String,
}

async fn submit_answer(
    State(st): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<AttemptRecord>, ApiError> {
    st.owned_session(&headers, &id)?;
    let a: AnswerBody = parse(&body)?;
    let record = blocking(move || Ok(st.store.submit_answer(&id, &a.item_id, &a.answer, now_ms())?)).await?;
    Ok(Json(record))
}

/// Score of a finished session. The dataset is left out so the learner stays blind to it.
#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreView {
    pub session_id: String,
    pub score: u32,
    pub total: u32,
}

async fn score(State(st): State<Shared>, headers: HeaderMap, Path(id): Path<String>) -> Result<Json<ScoreView>, ApiError> {
    let s = st.owned_session(&headers, &id)?;
    let sum = quiz::score_session(&s)?;
    Ok(Json(ScoreView { session_id: sum.session_id, score: sum.score, total: sum.total }))
}

#[derive(Debug, Deserialize)]
struct CompareQuery {
    protocol: String,
    a: String,
    b: String,
    #[serde(default)]
    test: Option<String>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
}

fn bad(message: String) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
}

/// Scores of completed sessions, computed from the attempt log.
pub fn completed_scores(store: &Store) -> Result<Vec<ScoreSummary>, StoreError> {
    let scores = quiz::scores_from_log(&store.attempt_log()?);
    Ok(store
        .sessions()
        .into_iter()
        .filter_map(|s| {
            scores.get(&s.session_id).map(|&score| ScoreSummary {
                session_id: s.session_id.clone(),
                user_id: s.user_id.clone(),
                protocol: s.protocol,
                dataset_tag: s.dataset_tag,
                score,
                total: s.items.len() as u32,
            })
        })
        .collect())
}

async fn compare(State(st): State<Shared>, headers: HeaderMap, Query(q): Query<CompareQuery>) -> Result<Json<CompareReport>, ApiError> {
    st.caller(&headers)?;
    let protocol = Protocol::from_code(&q.protocol).ok_or_else(|| bad(format!("unknown protocol {:?}", q.protocol)))?;
    let tag = |s: &str| DatasetTag::from_code(s).ok_or_else(|| bad(format!("unknown dataset {s:?}")));
    let (a, b) = (Cohort { protocol, dataset_tag: tag(&q.a)? }, Cohort { protocol, dataset_tag: tag(&q.b)? });
    let test: TestKind = q.test.as_deref().unwrap_or("z").parse().map_err(bad)?;
    let alpha = q.alpha.unwrap_or(st.alpha);
    let mut mcmc = st.mcmc.clone();
    mcmc.seed = q.seed.unwrap_or(mcmc.seed);
    let report = blocking(move || {
        let summaries = completed_scores(&st.store)?;
        Ok(stats_report(&summaries, a, b, &CompareOptions { test, alpha, mcmc })?)
    })
    .await?;
    Ok(Json(report))
}

async fn video(State(st): State<Shared>, Path(id): Path<String>, req: Request) -> Result<Response, ApiError> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "unknown_video", format!("no video {id}"));
    let path = st.store.video_path(&id).ok_or_else(not_found)?;
    let path = if path.is_relative() { st.media_root.join(path) } else { path };
    if !path.is_file() {
        return Err(not_found());
    }
    let res =
        ServeFile::new(path).oneshot(req).await.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    Ok(res.map(Body::new))
}

fn check_writable(dir: &std::path::Path) -> Result<(), ServeError> {
    let err = |source| ServeError::Root { path: dir.to_path_buf(), source };
    std::fs::create_dir_all(dir).map_err(err)?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"").map_err(err)?;
    std::fs::remove_file(&probe).map_err(err)
}

/// Binds, prints `listening on ADDR`, and serves until `shutdown` resolves.
/// The attempt log is synced on the way out.
pub async fn serve<F>(addr: SocketAddr, state: AppState, shutdown: F) -> Result<(), ServeError>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    check_writable(&state.media_root)?;
    check_writable(state.store.root())?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServeError::BindFailure { addr, source })?;
    let local = listener.local_addr().map_err(ServeError::Io)?;
    println!("listening on {local}");
    let state = Arc::new(state);
    axum::serve(listener, router(state.clone())).with_graceful_shutdown(shutdown).await.map_err(ServeError::Io)?;
    state.store.flush()?;
    Ok(())
}
