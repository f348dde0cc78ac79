//! HTTP + JSON front end for labeling sessions.
//!
//! Routes:
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | POST | `/sessions` | [`CreateSession`] | `{session_id, round, model_trained}` |
//! | GET | `/sessions/{id}/queries` | `?instances=k&features=m` | [`QueryView`] |
//! | POST | `/sessions/{id}/labels` | [`Submission`] | round log |
//! | POST | `/sessions/{id}/retrain` | | [`SessionMetrics`] |
//! | GET | `/sessions/{id}/metrics` | | [`SessionMetrics`] |
//! | GET | `/sessions/{id}/export` | | JSONL sentence records |
//! | GET | `/guidelines` | | labeling rules |
//! | GET | `/health` | | `{status, sessions}` |
//!
//! Every error is a JSON object `{code, message}`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use topic_forge::corpus::SentenceRecord;
use topic_forge::guidelines::Guidelines;
use topic_forge::session::{QueryView, SessionConfig, SessionError, SessionMetrics, SessionStore, Submission};

pub const DEFAULT_INSTANCES: usize = 10;
pub const DEFAULT_FEATURES: usize = 5;
/// Upper bound on `instances` and `features` per request.
pub const MAX_QUERIES: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub session_id: Option<String>,
    pub corpus: Vec<SentenceRecord>,
    #[serde(default)]
    pub evaluation: Vec<SentenceRecord>,
    #[serde(default)]
    pub config: SessionConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub round: u32,
    pub model_trained: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            SessionError::SessionExists(_) => (StatusCode::CONFLICT, "session_exists"),
            SessionError::EmptyCorpus => (StatusCode::UNPROCESSABLE_ENTITY, "empty_corpus"),
            SessionError::InvalidSessionId(_) => (StatusCode::BAD_REQUEST, "invalid_session_id"),
            SessionError::Labels(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_labels"),
            SessionError::Guidelines(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_rule"),
            SessionError::Io(_) | SessionError::CorruptLog { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs a store operation off the async workers; appends fsync the log.
async fn blocking<T, F>(store: &Arc<SessionStore>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&SessionStore) -> Result<T, SessionError> + Send + 'static,
{
    let store = Arc::clone(store);
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/guidelines", get(guidelines))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/queries", get(get_queries))
        .route("/sessions/{id}/labels", post(submit_labels))
        .route("/sessions/{id}/retrain", post(retrain))
        .route("/sessions/{id}/metrics", get(metrics))
        .route("/sessions/{id}/export", get(export))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(store)
}

async fn health(State(store): State<Arc<SessionStore>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "sessions": store.session_ids().len() }))
}

async fn guidelines() -> Json<Guidelines> {
    Json(Guidelines::bundled())
}

async fn create_session(State(store): State<Arc<SessionStore>>, body: Bytes) -> ApiResult<(StatusCode, Json<Created>)> {
    let req: CreateSession = parse_json(&body)?;
    let created = blocking(&store, move |s| {
        let id = s.create(req.session_id.as_deref(), req.corpus, req.evaluation, req.config)?;
        let m = s.metrics(&id)?;
        Ok(Created {
            session_id: id,
            round: m.round,
            model_trained: m.model_trained,
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(created)))
}

#[derive(Debug, Deserialize)]
struct QueryParams {
    instances: Option<String>,
    features: Option<String>,
}

fn count_param(name: &str, value: Option<&str>, default: usize) -> ApiResult<usize> {
    let Some(v) = value else {
        return Ok(default);
    };
    let n: usize = v
        .parse()
        .map_err(|_| ApiError::bad_request(format!("{name} must be a non-negative integer, got {v:?}")))?;
    if n > MAX_QUERIES {
        return Err(ApiError::bad_request(format!("{name} must be at most {MAX_QUERIES}")));
    }
    Ok(n)
}

async fn get_queries(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    Query(params): Query<QueryParams>,
) -> ApiResult<Json<QueryView>> {
    let k = count_param("instances", params.instances.as_deref(), DEFAULT_INSTANCES)?;
    let m = count_param("features", params.features.as_deref(), DEFAULT_FEATURES)?;
    Ok(Json(blocking(&store, move |s| s.queries(&id, k, m)).await?))
}

async fn submit_labels(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<topic_forge::active::AlRoundLog>> {
    let sub: Submission = parse_json(&body)?;
    if sub.token.is_empty() {
        return Err(ApiError::bad_request("token must not be empty"));
    }
    Ok(Json(blocking(&store, move |s| s.submit(&id, sub)).await?))
}

async fn retrain(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<Json<SessionMetrics>> {
    Ok(Json(blocking(&store, move |s| s.retrain(&id)).await?))
}

async fn metrics(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<Json<SessionMetrics>> {
    Ok(Json(blocking(&store, move |s| s.metrics(&id)).await?))
}

async fn export(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let body = blocking(&store, move |s| s.export_jsonl(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body))
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, store: Arc<SessionStore>) -> std::io::Result<()> {
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr).await
}
