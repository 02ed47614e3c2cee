//! HTTP/JSON transport for sessions.
//!
//! | Method | Path | Body | Response |
//! |---|---|---|---|
//! | POST | `/sessions` | `{"scenario": id, "scale_mode"?}` | 201 [`SessionHandle`] |
//! | GET | `/sessions/{id}` | | [`Snapshot`] |
//! | POST | `/sessions/{id}/events` | [`SessionEvent`] | [`EventResponse`], 409 [`RejectedEvent`], 422, 429 |
//! | GET | `/sessions/{id}/log` | | `application/x-ndjson` event log |
//! | DELETE | `/sessions/{id}` | | 204 |
//! | GET | `/scenarios` | | list of [`ScenarioInfo`] |
//! | GET | `/scenarios/{id}/meshes/{head\|ventricles}` | | [`MeshResponse`] |
//!
//! Events for one session are applied under a per-session lock in arrival
//! order. Marker updates are limited to [`MARKER_UPDATES_PER_SECOND`] per
//! session.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use crate::io::{IoError, LoadedScenario, MeshPayload, SCENARIO_FILE};
use crate::registration::ScaleMode;
use crate::session::{EffectReport, RejectedEvent, Session, SessionEvent, SessionState};
use crate::simulation::trial_seed;

pub const MARKER_UPDATES_PER_SECOND: usize = 30;

/// Scenarios available to new sessions, keyed by id.
#[derive(Debug, Default)]
pub struct ScenarioRegistry {
    scenarios: BTreeMap<String, Arc<LoadedScenario>>,
}

impl ScenarioRegistry {
    /// Loads every `<dir>/<id>/scenario.json`.
    pub fn load_dir(dir: &Path) -> Result<Self, IoError> {
        let mut reg = Self::default();
        let entries = std::fs::read_dir(dir).map_err(|e| IoError::io(dir, e))?;
        let mut paths: Vec<PathBuf> =
            entries.filter_map(|e| e.ok()).map(|e| e.path().join(SCENARIO_FILE)).filter(|p| p.is_file()).collect();
        paths.sort();
        for p in paths {
            reg.insert(LoadedScenario::load(&p)?);
        }
        Ok(reg)
    }

    pub fn insert(&mut self, s: LoadedScenario) {
        self.scenarios.insert(s.id.clone(), Arc::new(s));
    }

    pub fn get(&self, id: &str) -> Option<&Arc<LoadedScenario>> {
        self.scenarios.get(id)
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub id: String,
    pub scenario: String,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    /// Events applied so far, accepted or rejected.
    pub event_counter: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub handle: SessionHandle,
    pub prompt: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tre_mm: Option<f64>,
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventResponse {
    pub snapshot: Snapshot,
    pub effect: EffectReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub id: String,
    pub name: String,
    pub synthetic: bool,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshResponse {
    /// `world` for the head, `model` for the ventricles.
    pub space: String,
    #[serde(flatten)]
    pub mesh: MeshPayload,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSession {
    pub scenario: String,
    #[serde(default)]
    pub scale_mode: ScaleMode,
}

struct Slot {
    scenario: String,
    created_at: u64,
    session: Session,
    marker_times: VecDeque<Instant>,
}

impl Slot {
    fn handle(&self, id: &str) -> SessionHandle {
        SessionHandle {
            id: id.to_string(),
            scenario: self.scenario.clone(),
            created_at: self.created_at,
            event_counter: self.session.log().len() as u64,
        }
    }

    fn snapshot(&self, id: &str) -> Snapshot {
        let state = self.session.state().clone();
        Snapshot {
            handle: self.handle(id),
            prompt: state.prompt(),
            rmse_mm: state.registration.as_ref().map(|r| r.rmse),
            tre_mm: state.tre_mm,
            state,
        }
    }
}

/// Shared service state.
pub struct AppState {
    scenarios: ScenarioRegistry,
    sessions: RwLock<HashMap<String, Arc<Mutex<Slot>>>>,
    next_id: AtomicU64,
    id_salt: u64,
    log_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(scenarios: ScenarioRegistry) -> Self {
        let salt = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos() as u64).unwrap_or(0);
        Self {
            scenarios,
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(0),
            id_salt: salt,
            log_dir: None,
        }
    }

    /// Appends every event to `<dir>/<session id>.jsonl`.
    pub fn with_log_dir(mut self, dir: PathBuf) -> Self {
        self.log_dir = Some(dir);
        self
    }

    fn new_id(&self) -> String {
        let n = self.next_id.fetch_add(1, Ordering::Relaxed);
        // Distinct counters give distinct ids: the mixer is a bijection.
        format!("{:016x}", trial_seed(self.id_salt, 0, n))
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<Slot>>, ApiError> {
        self.sessions.read().expect("lock").get(id).cloned().ok_or_else(|| ApiError::not_found("session", id))
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    rejected: Option<RejectedEvent>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, msg: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { error: msg.into(), rejected: None } }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what} '{id}'"))
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, r.body_text())
    }
}

impl From<RejectedEvent> for ApiError {
    fn from(r: RejectedEvent) -> Self {
        Self { status: StatusCode::CONFLICT, body: ErrorBody { error: r.reason.clone(), rejected: Some(r) } }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", axum::routing::post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/events", axum::routing::post(post_event))
        .route("/sessions/{id}/log", get(get_log))
        .route("/scenarios", get(list_scenarios))
        .route("/scenarios/{id}/meshes/{which}", get(get_mesh))
        .with_state(state)
}

/// Serves until the listener fails or the process receives Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn create_session(
    State(app): Shared,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionHandle>), ApiError> {
    let Json(req) = body?;
    req.scale_mode.validate().map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let scenario = app.scenarios.get(&req.scenario).ok_or_else(|| ApiError::not_found("scenario", &req.scenario))?;
    let ctx = Arc::new(scenario.session_context(req.scale_mode));
    let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
    let id = app.new_id();
    let slot =
        Slot { scenario: scenario.id.clone(), created_at, session: Session::new(ctx), marker_times: VecDeque::new() };
    let handle = slot.handle(&id);
    app.sessions.write().expect("lock").insert(id, Arc::new(Mutex::new(slot)));
    Ok((StatusCode::CREATED, Json(handle)))
}

async fn get_session(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<Json<Snapshot>, ApiError> {
    let slot = app.slot(&id)?;
    let guard = slot.lock().await;
    Ok(Json(guard.snapshot(&id)))
}

async fn delete_session(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<StatusCode, ApiError> {
    match app.sessions.write().expect("lock").remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::not_found("session", &id)),
    }
}

async fn post_event(
    State(app): Shared,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<SessionEvent>, JsonRejection>,
) -> Result<Json<EventResponse>, ApiError> {
    let slot = app.slot(&id)?;
    let Json(event) = body?;
    let mut guard = slot.lock().await;
    if matches!(event, SessionEvent::MarkerUpdate { .. }) {
        let now = Instant::now();
        while guard.marker_times.front().is_some_and(|t| now.duration_since(*t) >= Duration::from_secs(1)) {
            guard.marker_times.pop_front();
        }
        if guard.marker_times.len() >= MARKER_UPDATES_PER_SECOND {
            return Err(ApiError::new(
                StatusCode::TOO_MANY_REQUESTS,
                format!("marker updates are limited to {MARKER_UPDATES_PER_SECOND} per second"),
            ));
        }
        guard.marker_times.push_back(now);
    }
    let result = guard.session.apply(event);
    if let Some(dir) = &app.log_dir {
        persist_last(dir, &id, &guard.session);
    }
    let effect = result?;
    Ok(Json(EventResponse { snapshot: guard.snapshot(&id), effect }))
}

fn persist_last(dir: &Path, id: &str, session: &Session) {
    use std::io::Write;
    let Some(last) = session.log().last() else { return };
    let path = dir.join(format!("{id}.jsonl"));
    let line = serde_json::to_string(last).expect("log entries serialize");
    let res = std::fs::OpenOptions::new().create(true).append(true).open(&path).and_then(|mut f| writeln!(f, "{line}"));
    if let Err(e) = res {
        log::warn!("cannot append to {}: {e}", path.display());
    }
}

async fn get_log(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let slot = app.slot(&id)?;
    let text = slot.lock().await.session.log_jsonl();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn list_scenarios(State(app): Shared) -> Json<Vec<ScenarioInfo>> {
    Json(
        app.scenarios
            .scenarios
            .values()
            .map(|s| ScenarioInfo {
                id: s.id.clone(),
                name: s.scenario.name.clone(),
                synthetic: s.scenario.synthetic,
                description: s.scenario.description.clone(),
            })
            .collect(),
    )
}

async fn get_mesh(
    State(app): Shared,
    UrlPath((id, which)): UrlPath<(String, String)>,
) -> Result<Json<MeshResponse>, ApiError> {
    let s = app.scenarios.get(&id).ok_or_else(|| ApiError::not_found("scenario", &id))?;
    let (space, mesh) = match which.as_str() {
        "head" => ("world", s.scene.head_mesh()),
        "ventricles" => ("model", s.scene.ventricle_mesh()),
        _ => return Err(ApiError::not_found("mesh", &which)),
    };
    Ok(Json(MeshResponse { space: space.into(), mesh: MeshPayload::from(mesh) }))
}
