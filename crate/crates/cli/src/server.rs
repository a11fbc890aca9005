//! HTTP API over in-memory sessions.
//!
//! Each session sits behind its own async mutex, so steps on one session
//! are applied in arrival order while other sessions proceed independently.
//! Engine work runs on the blocking pool.

use std::collections::HashMap;
use std::hash::{BuildHasher, RandomState};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pyrofront_core::{Cell, Mode, SaveFile, ScenarioSpec, Session, SessionError, Viewport};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::Mutex;

type Shared = Arc<Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Shared>>>,
    counter: Arc<AtomicU64>,
    ids: RandomState,
    default_mode: Mode,
}

impl AppState {
    pub fn new(default_mode: Mode) -> Self {
        Self {
            sessions: Arc::default(),
            counter: Arc::default(),
            ids: RandomState::new(),
            default_mode,
        }
    }

    fn insert(&self, session: Session) -> String {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let id = format!("{:016x}{n:x}", self.ids.hash_one(n));
        self.sessions
            .write()
            .expect("session table lock")
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        id
    }

    fn get(&self, id: &str) -> Result<Shared, ApiError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session {id:?}")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            e if e.is_rejected_order() => StatusCode::CONFLICT,
            SessionError::NoSuchTime(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

/// `POST /sessions` body: a save file to load, or a scenario to start.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum CreateBody {
    Load { save: SaveFile },
    Create { scenario: ScenarioSpec, mode: Option<Mode> },
    Spec(ScenarioSpec),
}

#[derive(Debug, Deserialize)]
pub struct StepBody {
    #[serde(default)]
    pub orders: Vec<Cell>,
}

#[derive(Debug, Default, Deserialize)]
pub struct ViewQuery {
    pub x0: Option<i32>,
    pub y0: Option<i32>,
    pub x1: Option<i32>,
    pub y1: Option<i32>,
    pub t: Option<u32>,
}

impl ViewQuery {
    fn viewport(&self) -> Result<Option<Viewport>, ApiError> {
        match (self.x0, self.y0, self.x1, self.y1) {
            (Some(x0), Some(y0), Some(x1), Some(y1)) => Ok(Some(Viewport { x0, y0, x1, y1 })),
            (None, None, None, None) => Ok(None),
            _ => Err(ApiError::new(StatusCode::BAD_REQUEST, "viewport needs all of x0, y0, x1, y1")),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct LedgerQuery {
    #[serde(default)]
    pub from: u32,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/state", get(view))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/overlay", get(overlay))
        .route("/sessions/{id}/ledger", get(ledger))
        .route("/sessions/{id}/save", post(save))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

async fn create(State(app): State<AppState>, Json(body): Json<CreateBody>) -> Result<Response, ApiError> {
    let default_mode = app.default_mode;
    let session = blocking(move || match body {
        CreateBody::Load { save } => Session::load(&save),
        CreateBody::Create { scenario, mode } => Session::create(&scenario, mode.unwrap_or(default_mode)),
        CreateBody::Spec(scenario) => Session::create(&scenario, default_mode),
    })
    .await??;
    let state = session.view(None);
    let id = app.insert(session);
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "state": state }))).into_response())
}

async fn view(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ViewQuery>,
) -> Result<Response, ApiError> {
    let viewport = q.viewport()?;
    let session = app.get(&id)?.lock_owned().await;
    Ok(Json(session.view(viewport)).into_response())
}

async fn step(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<StepBody>,
) -> Result<Response, ApiError> {
    let mut session = app.get(&id)?.lock_owned().await;
    let (event, state) = blocking(move || {
        let event = session.step(body.orders)?;
        Ok::<_, SessionError>((event, session.view(None)))
    })
    .await??;
    Ok(Json(json!({ "event": event, "state": state })).into_response())
}

async fn overlay(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ViewQuery>,
) -> Result<Response, ApiError> {
    let viewport = q.viewport()?;
    let session = app.get(&id)?.lock_owned().await;
    let overlay = blocking(move || session.overlay(q.t, viewport)).await??;
    Ok(Json(overlay).into_response())
}

async fn ledger(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<LedgerQuery>,
) -> Result<Response, ApiError> {
    let session = app.get(&id)?.lock_owned().await;
    let rows = session.ledger(q.from)?;
    Ok(Json(rows).into_response())
}

async fn save(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = app.get(&id)?.lock_owned().await;
    Ok(Json(session.save()).into_response())
}

pub async fn serve(host: &str, port: u16) -> anyhow::Result<()> {
    let mode = Mode::from_env()?;
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    eprintln!("listening on {} ({mode} mode)", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(mode))).await?;
    Ok(())
}
