//! JSON-over-HTTP session service.
//!
//! Handlers only translate between HTTP and orchestrator/memory calls.
//! Each session sits behind its own mutex (one writer at a time); reads are
//! served from a snapshot refreshed after every mutation, so polling never
//! waits on a model call in progress.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use ramp_core::memory::{MemoryError, MemoryKind, MemorySource, MemoryStore};
use ramp_core::orchestrator::{Decision, Session, SessionConfig, SessionDeps, SessionError, SessionState};
use ramp_core::table::CustomerTable;

use crate::providers::ProviderSource;

pub const DEFAULT_AUDIENCE_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
        }
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what}"))
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let msg = e.to_string();
        match e {
            SessionError::WrongPhase { .. } => Self::new(StatusCode::CONFLICT, "wrong_phase", msg),
            SessionError::Finished => Self::new(StatusCode::CONFLICT, "finished", msg),
            SessionError::NotAuto => Self::new(StatusCode::CONFLICT, "not_auto", msg),
            SessionError::InvalidConfig(_) => Self::new(StatusCode::BAD_REQUEST, "invalid_config", msg),
            SessionError::EmptyAmendment => Self::bad_request(msg),
        }
    }
}

impl From<MemoryError> for ApiError {
    fn from(e: MemoryError) -> Self {
        match e {
            MemoryError::UnknownId(_) => Self::new(StatusCode::NOT_FOUND, "not_found", e.to_string()),
            MemoryError::EmptyText | MemoryError::DuplicateId(_) => Self::bad_request(e.to_string()),
            other => Self::internal(other.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Body parsing with `ApiError` rejections instead of axum's plain text.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

struct Snapshot {
    state: SessionState,
    audience: CustomerTable,
}

struct Entry {
    session: Arc<Mutex<Session>>,
    snapshot: Arc<RwLock<Snapshot>>,
    touched: Instant,
}

pub struct AppState {
    table: Option<CustomerTable>,
    memory: Arc<RwLock<MemoryStore>>,
    memory_path: Option<PathBuf>,
    providers: ProviderSource,
    sessions: Mutex<HashMap<String, Entry>>,
    ttl: Duration,
}

impl AppState {
    pub fn new(
        table: Option<CustomerTable>,
        memory: MemoryStore,
        memory_path: Option<PathBuf>,
        providers: ProviderSource,
        ttl: Duration,
    ) -> Self {
        AppState {
            table,
            memory: Arc::new(RwLock::new(memory)),
            memory_path,
            providers,
            sessions: Mutex::new(HashMap::new()),
            ttl,
        }
    }

    pub fn memory(&self) -> &Arc<RwLock<MemoryStore>> {
        &self.memory
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    /// Drop sessions idle for longer than the TTL; returns how many.
    pub fn evict_idle(&self) -> usize {
        let mut sessions = self.sessions.lock().unwrap();
        let before = sessions.len();
        sessions.retain(|_, e| e.touched.elapsed() <= self.ttl);
        before - sessions.len()
    }

    fn entry(&self, id: &str) -> ApiResult<(Arc<Mutex<Session>>, Arc<RwLock<Snapshot>>)> {
        let mut sessions = self.sessions.lock().unwrap();
        match sessions.get_mut(id) {
            Some(e) if e.touched.elapsed() <= self.ttl => {
                e.touched = Instant::now();
                Ok((e.session.clone(), e.snapshot.clone()))
            }
            Some(_) => {
                sessions.remove(id);
                Err(ApiError::not_found("session"))
            }
            None => Err(ApiError::not_found("session")),
        }
    }

    fn persist_memory(&self, store: &MemoryStore) -> ApiResult<()> {
        if let Some(path) = &self.memory_path {
            store.persist(path)?;
        }
        Ok(())
    }
}

fn snapshot_of(session: &Session) -> Snapshot {
    Snapshot {
        state: session.state().clone(),
        audience: session.audience(),
    }
}

/// Run a session mutation off the async workers and refresh the snapshot.
async fn mutate(
    session: Arc<Mutex<Session>>,
    snapshot: Arc<RwLock<Snapshot>>,
    f: impl FnOnce(&mut Session) -> Result<(), SessionError> + Send + 'static,
) -> ApiResult<SessionState> {
    tokio::task::spawn_blocking(move || {
        let mut s = session.lock().unwrap();
        let result = f(&mut s);
        let snap = snapshot_of(&s);
        let state = snap.state.clone();
        *snapshot.write().unwrap() = snap;
        result.map(|_| state).map_err(ApiError::from)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/transcript", get(transcript))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/decision", post(decision))
        .route("/sessions/{id}/audience", get(audience))
        .route("/sessions/{id}/audience.csv", get(audience_csv))
        .route("/memory/{kind}", get(list_memory).post(add_memory))
        .route("/memory/{kind}/{id}", delete(remove_memory))
        .fallback(|| async { ApiError::not_found("route") })
        .with_state(state)
}

/// Periodically evict idle sessions until the runtime shuts down.
pub fn spawn_evictor(state: Arc<AppState>) -> tokio::task::JoinHandle<()> {
    let every = state.ttl.clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            let n = state.evict_idle();
            if n > 0 {
                log::info!("evicted {n} idle sessions");
            }
        }
    })
}

async fn health(State(app): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({"status": "ok", "table_loaded": app.table.is_some()}))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    query: String,
    config: SessionConfig,
    /// Selects scripted responses when the server replays a transcript.
    #[serde(default)]
    script_id: Option<String>,
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let req: CreateSession = parse_body(&body)?;
    let table = app
        .table
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_table", "no table loaded"))?;
    let llm = app
        .providers
        .for_session(req.script_id.as_deref())
        .map_err(|m| ApiError::new(StatusCode::BAD_REQUEST, "no_script", m))?;
    let id = uuid::Uuid::new_v4().to_string();
    let deps = SessionDeps {
        table,
        memory: app.memory.clone(),
        llm,
    };
    let session = Session::start(id.clone(), &req.query, req.config, deps)?;
    let entry = Entry {
        snapshot: Arc::new(RwLock::new(snapshot_of(&session))),
        session: Arc::new(Mutex::new(session)),
        touched: Instant::now(),
    };
    app.sessions.lock().unwrap().insert(id.clone(), entry);
    Ok((StatusCode::CREATED, Json(json!({"session_id": id}))))
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionState>> {
    let (_, snap) = app.entry(&id)?;
    let state = snap.read().unwrap().state.clone();
    Ok(Json(state))
}

#[derive(Deserialize)]
struct TranscriptQuery {
    after_seq: Option<u64>,
}

async fn transcript(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<TranscriptQuery>,
) -> ApiResult<Response> {
    let (_, snap) = app.entry(&id)?;
    let snap = snap.read().unwrap();
    let after = q.after_seq.unwrap_or(0);
    let events: Vec<_> = snap.state.transcript.iter().filter(|e| e.seq > after).collect();
    Ok(Json(events).into_response())
}

async fn step(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionState>> {
    let (session, snap) = app.entry(&id)?;
    mutate(session, snap, |s| s.step().map(|_| ())).await.map(Json)
}

async fn decision(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<SessionState>> {
    let d: Decision = parse_body(&body)?;
    let (session, snap) = app.entry(&id)?;
    mutate(session, snap, move |s| s.submit_decision(d).map(|_| ())).await.map(Json)
}

#[derive(Deserialize)]
struct AudienceQuery {
    limit: Option<usize>,
}

async fn audience(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<AudienceQuery>,
) -> ApiResult<Json<serde_json::Value>> {
    let (_, snap) = app.entry(&id)?;
    let snap = snap.read().unwrap();
    let table = &snap.audience;
    let limit = q.limit.unwrap_or(DEFAULT_AUDIENCE_LIMIT);
    let rows: Vec<_> = table.row_indices().iter().take(limit).map(|&r| table.row_json(r)).collect();
    Ok(Json(json!({
        "total": table.row_count(),
        "ids": table.audience_ids(),
        "rows": rows,
    })))
}

async fn audience_csv(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let (_, snap) = app.entry(&id)?;
    let mut buf = Vec::new();
    snap.read()
        .unwrap()
        .audience
        .write_csv(&mut buf)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"audience-{id}.csv\"")),
        ],
        buf,
    )
        .into_response())
}

fn parse_kind(kind: &str) -> ApiResult<MemoryKind> {
    match kind {
        "semantic" => Ok(MemoryKind::Semantic),
        "episodic" => Ok(MemoryKind::Episodic),
        other => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("unknown memory kind `{other}`"),
        )),
    }
}

async fn list_memory(State(app): State<Arc<AppState>>, Path(kind): Path<String>) -> ApiResult<Response> {
    let kind = parse_kind(&kind)?;
    let store = app.memory.read().unwrap();
    Ok(Json(store.list(kind)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewMemory {
    text: String,
    #[serde(default)]
    source: Option<MemorySource>,
}

async fn add_memory(
    State(app): State<Arc<AppState>>,
    Path(kind): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let kind = parse_kind(&kind)?;
    let req: NewMemory = parse_body(&body)?;
    let mut store = app.memory.write().unwrap();
    let id = store.add(kind, req.text, req.source.unwrap_or(MemorySource::Human))?;
    app.persist_memory(&store)?;
    Ok((StatusCode::CREATED, Json(json!({"id": id}))))
}

async fn remove_memory(State(app): State<Arc<AppState>>, Path((kind, id)): Path<(String, String)>) -> ApiResult<StatusCode> {
    let kind = parse_kind(&kind)?;
    let mut store = app.memory.write().unwrap();
    match store.get(&id) {
        Some(item) if item.kind == kind => {}
        _ => return Err(ApiError::not_found("memory id")),
    }
    store.remove(&id)?;
    app.persist_memory(&store)?;
    Ok(StatusCode::NO_CONTENT)
}
