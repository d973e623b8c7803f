//! HTTP session API.
//!
//! Everything lives in memory. Sessions are guarded by their own mutex so
//! requests to one session are serialized while others proceed. There is no
//! authentication; session ids are random 128-bit tokens.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::catalog::Catalog;
use crate::policy::{DependenceRefresh, Policy, PolicyConfig, QueryMode};
use crate::scorer::{cold_start_scores, ScoreVector};
use crate::session::{AnswerRecord, Event, Limits, Outcome, QueryRecord, Session, SessionError};

/// Four uniform items split in half by `color`.
pub const DEMO_CATALOG: &str = r#"{
  "attributes": [
    {"name": "color", "kind": "discrete", "values": ["r", "b"], "query_style": "value_query"}
  ],
  "items": [
    {"id": "v1", "values": {"color": "r"}},
    {"id": "v2", "values": {"color": "r"}},
    {"id": "v3", "values": {"color": "b"}},
    {"id": "v4", "values": {"color": "b"}}
  ]
}"#;

pub const HOTELS_CATALOG: &str = r#"{
  "attributes": [
    {"name": "level", "kind": "discrete", "values": [3, 5], "query_style": "value_query"},
    {"name": "price", "kind": "continuous", "query_style": "threshold_query"}
  ],
  "items": [
    {"id": "v1", "values": {"level": 3, "price": 100}},
    {"id": "v2", "values": {"level": 5, "price": 200}},
    {"id": "v3", "values": {"level": 3, "price": 300}},
    {"id": "v4", "values": {"level": 5, "price": 400}}
  ]
}"#;

pub const HOTELS_SCORES: &str = r#"{"v1": 0.4, "v2": 0.3, "v3": 0.2, "v4": 0.1}"#;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({"code": self.code, "message": self.message})),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

struct ScoreEntry {
    catalog_id: String,
    scores: Arc<ScoreVector>,
}

struct SessionEntry {
    catalog_id: String,
    session: Session,
    created_at: u64,
    last_active: u64,
}

/// Shared server state.
pub struct AppState {
    catalogs: RwLock<HashMap<String, Arc<Catalog>>>,
    scores: RwLock<HashMap<String, ScoreEntry>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionEntry>>>>,
    next_upload: AtomicU64,
    transcript_log: Option<Mutex<File>>,
}

impl AppState {
    /// State preloaded with the `demo` and `hotels` catalogs (and `hotels` scores).
    pub fn new() -> Self {
        let state = AppState {
            catalogs: RwLock::default(),
            scores: RwLock::default(),
            sessions: RwLock::default(),
            next_upload: AtomicU64::new(1),
            transcript_log: None,
        };
        let demo = Arc::new(Catalog::from_json_str(DEMO_CATALOG).expect("demo catalog"));
        let hotels = Arc::new(Catalog::from_json_str(HOTELS_CATALOG).expect("hotels catalog"));
        let hotel_scores =
            crate::scorer::scores_from_json_str(HOTELS_SCORES, &hotels).expect("hotel scores");
        state.insert_catalog("demo".into(), demo);
        state.insert_catalog("hotels".into(), hotels);
        state.scores.write().unwrap().insert(
            "hotels".into(),
            ScoreEntry {
                catalog_id: "hotels".into(),
                scores: Arc::new(hotel_scores),
            },
        );
        state
    }

    /// Appends each finished transcript as one JSON line to `path`.
    pub fn with_transcript_log(mut self, path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.transcript_log = Some(Mutex::new(file));
        Ok(self)
    }

    pub fn insert_catalog(&self, id: String, catalog: Arc<Catalog>) {
        self.catalogs.write().unwrap().insert(id, catalog);
    }

    fn upload_id(&self, prefix: &str) -> String {
        format!(
            "{prefix}-{}",
            self.next_upload.fetch_add(1, Ordering::Relaxed)
        )
    }

    fn catalog(&self, id: &str) -> Result<Arc<Catalog>, ApiError> {
        self.catalogs
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown catalog {id:?}")))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionEntry>>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id:?}")))
    }

    fn log_transcript(&self, id: &str, session: &Session) {
        if let Some(log) = &self.transcript_log {
            let line = session.transcript(id, 0).to_jsonl();
            let mut file = log.lock().unwrap();
            let _ = writeln!(file, "{line}");
        }
    }
}

impl Default for AppState {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Deserialize)]
struct CreateScoresRequest {
    catalog_id: String,
    scores: HashMap<String, f64>,
}

fn default_scores_id() -> String {
    "cold_start".into()
}

fn default_mode() -> String {
    "declared".into()
}

fn default_k_max() -> usize {
    5
}

#[derive(Deserialize)]
struct CreateSessionRequest {
    catalog_id: String,
    #[serde(default = "default_scores_id")]
    scores_id: String,
    policy: String,
    #[serde(default = "default_mode")]
    mode: String,
    #[serde(default = "default_k_max")]
    k_max: usize,
    #[serde(default)]
    frozen_dependence: bool,
}

#[derive(Serialize)]
struct Recommendation {
    item: String,
}

/// Read-only view of a session, as returned by `GET /v1/sessions/{id}`.
#[derive(Serialize)]
struct SessionView {
    session_id: String,
    catalog_id: String,
    policy: String,
    mode: String,
    k_max: usize,
    status: String,
    turn: usize,
    remaining: usize,
    uncertainty: f64,
    unchecked_attributes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pending_query: Option<QueryRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    recommendation: Option<Recommendation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<Outcome>,
    events: Vec<Event>,
    created_at: u64,
    last_active: u64,
}

fn view(id: &str, entry: &SessionEntry) -> SessionView {
    let s = &entry.session;
    let catalog = s.catalog();
    SessionView {
        session_id: id.to_string(),
        catalog_id: entry.catalog_id.clone(),
        policy: s.config().policy.name().into(),
        mode: s.config().mode.name().into(),
        k_max: s.limits().k_max,
        status: s.state().status.name().into(),
        turn: s.state().turn,
        remaining: s.state().frontier.items.len(),
        uncertainty: s.uncertainty(),
        unchecked_attributes: s
            .state()
            .frontier
            .attrs
            .iter()
            .map(|&x| catalog.attribute(x).name.clone())
            .collect(),
        pending_query: s.pending_record(),
        recommendation: s.recommendation().map(|i| Recommendation {
            item: catalog.item_id(i).to_string(),
        }),
        outcome: s.is_terminal().then(|| s.outcome()),
        events: s.events().to_vec(),
        created_at: entry.created_at,
        last_active: entry.last_active,
    }
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn create_catalog(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<serde_json::Value> {
    let text =
        std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let catalog = Catalog::from_json_str(text).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let id = state.upload_id("catalog");
    let summary = json!({
        "catalog_id": id,
        "items": catalog.len(),
        "attributes": catalog.attributes().len(),
    });
    state.insert_catalog(id, Arc::new(catalog));
    Ok(Json(summary))
}

async fn create_scores(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<serde_json::Value> {
    let req: CreateScoresRequest = parse_body(&body)?;
    let catalog = state.catalog(&req.catalog_id)?;
    let scores = ScoreVector::from_map(&catalog, &req.scores)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let id = state.upload_id("scores");
    state.scores.write().unwrap().insert(
        id.clone(),
        ScoreEntry {
            catalog_id: req.catalog_id,
            scores: Arc::new(scores),
        },
    );
    Ok(Json(json!({"scores_id": id})))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<serde_json::Value> {
    let req: CreateSessionRequest = parse_body(&body)?;
    let catalog = state.catalog(&req.catalog_id)?;
    let policy: Policy = req
        .policy
        .parse()
        .map_err(|e: crate::policy::ParseNameError| ApiError::bad_request(e.to_string()))?;
    let mode: QueryMode = req
        .mode
        .parse()
        .map_err(|e: crate::policy::ParseNameError| ApiError::bad_request(e.to_string()))?;
    if req.k_max == 0 {
        return Err(ApiError::bad_request("k_max must be at least 1"));
    }
    let scores = if req.scores_id == "cold_start" {
        Arc::new(cold_start_scores(&catalog))
    } else {
        let all = state.scores.read().unwrap();
        let entry = all
            .get(&req.scores_id)
            .ok_or_else(|| ApiError::not_found(format!("unknown scores {:?}", req.scores_id)))?;
        if entry.catalog_id != req.catalog_id {
            return Err(ApiError::bad_request(format!(
                "scores {:?} belong to catalog {:?}",
                req.scores_id, entry.catalog_id
            )));
        }
        entry.scores.clone()
    };
    let mut cfg = PolicyConfig::new(policy, mode);
    if req.frozen_dependence {
        cfg.dependence_refresh = DependenceRefresh::Frozen;
    }
    let session = Session::start(catalog, scores, cfg, Limits::new(req.k_max))
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let id = format!("{:032x}", rand::random::<u128>());
    let now = now_millis();
    let entry = SessionEntry {
        catalog_id: req.catalog_id,
        session,
        created_at: now,
        last_active: now,
    };
    let response = json!({
        "session_id": id,
        "first_query": entry.session.pending_record(),
        "session": view(&id, &entry),
    });
    state
        .sessions
        .write()
        .unwrap()
        .insert(id, Arc::new(Mutex::new(entry)));
    Ok(Json(response))
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<SessionView> {
    let entry = state.session(&id)?;
    let entry = entry.lock().unwrap();
    Ok(Json(view(&id, &entry)))
}

async fn post_answer(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<serde_json::Value> {
    let record: AnswerRecord = parse_body(&body)?;
    let entry = state.session(&id)?;
    let mut entry = entry.lock().unwrap();
    let Some(pending) = entry.session.pending().copied() else {
        return Err(ApiError::new(
            StatusCode::GONE,
            "gone",
            "session is already terminal",
        ));
    };
    let conflict = |e: SessionError| ApiError::new(StatusCode::CONFLICT, "conflict", e.to_string());
    let answer = record
        .resolve(entry.session.catalog(), &pending.scored.action)
        .map_err(conflict)?;
    entry.session.answer(answer).map_err(conflict)?;
    entry.last_active = now_millis();
    if entry.session.is_terminal() {
        state.log_transcript(&id, &entry.session);
    }
    let v = view(&id, &entry);
    Ok(Json(json!({
        "next_query": v.pending_query,
        "recommendation": v.recommendation,
        "outcome": v.outcome,
        "session": v,
    })))
}

/// API routes only.
pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/healthz", get(healthz))
        .route("/v1/catalogs", post(create_catalog))
        .route("/v1/scores", post(create_scores))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/answers", post(post_answer))
        .with_state(state)
}

/// API routes plus static files from `ui_dir` for every other path.
pub fn router_with_ui(state: Arc<AppState>, ui_dir: impl Into<PathBuf>) -> Router {
    router(state).fallback_service(ServeDir::new(ui_dir.into()))
}

pub async fn serve(
    addr: SocketAddr,
    state: Arc<AppState>,
    ui_dir: Option<PathBuf>,
) -> std::io::Result<()> {
    let app = match ui_dir {
        Some(dir) => router_with_ui(state, dir),
        None => router(state),
    };
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app).await
}
