//! HTTP service. Each session sits behind its own mutex, so operations on
//! one session apply in a strict order while different sessions proceed in
//! parallel. Every accepted operation is durable before it is acknowledged.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::Rng;
use tokio::sync::{Mutex, RwLock};

use rsl_core::export::export_layers;
use rsl_core::session::{session_id_for, DialInput, Session, SessionConfig};
use rsl_core::{DialSetting, ExportError, SessionError};

use crate::protocol::*;
use crate::store::{EventStore, StoreError};

pub const DEFAULT_DELAY_MS: (u64, u64) = (600, 1200);

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub store_dir: PathBuf,
    /// Used when a create request carries no seed.
    pub master_seed: u64,
    pub session: SessionConfig,
    /// Bounds of the uniform helper "working" delay; `None` disables it.
    pub delay_ms: Option<(u64, u64)>,
}

impl ServerConfig {
    pub fn new(store_dir: impl Into<PathBuf>) -> Self {
        Self {
            store_dir: store_dir.into(),
            master_seed: 0,
            session: SessionConfig::default(),
            delay_ms: Some(DEFAULT_DELAY_MS),
        }
    }
}

pub struct AppState {
    pub config: ServerConfig,
    pub store: EventStore,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    /// Opens the store and rebuilds every logged session.
    pub fn recover(config: ServerConfig) -> Result<Arc<Self>, StoreError> {
        let store = EventStore::open(&config.store_dir)?;
        let sessions = store
            .recover_all()?
            .into_iter()
            .map(|s| (s.session_id.clone(), Arc::new(Mutex::new(s))))
            .collect();
        Ok(Arc::new(Self {
            config,
            store,
            sessions: RwLock::new(sessions),
        }))
    }

    pub async fn session(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.read().await.get(id).cloned()
    }

    pub async fn session_count(&self) -> usize {
        self.sessions.read().await.len()
    }

    /// Runs `op` and persists the events it produced. If persisting fails,
    /// the in-memory session is rebuilt from whatever reached the disk.
    fn apply<T>(
        &self,
        session: &mut Session,
        op: impl FnOnce(&mut Session) -> Result<T, SessionError>,
    ) -> Result<T, ApiError> {
        let before = session.events.len();
        let backup = session.clone();
        let out = op(session)?;
        if let Err(e) = self.store.append(&session.session_id, &session.events[before..]) {
            *session = self.store.recover(&session.session_id).unwrap_or(backup);
            return Err(e.into());
        }
        Ok(out)
    }

    async fn helper_delay(&self) {
        if let Some((lo, hi)) = self.config.delay_ms {
            let ms = rand::thread_rng().gen_range(lo..=hi.max(lo));
            tokio::time::sleep(Duration::from_millis(ms)).await;
        }
    }
}

#[derive(Debug)]
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

    fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}"))
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        use SessionError::*;
        let (status, code) = match &e {
            SessionNotActive => (StatusCode::CONFLICT, "session_not_active"),
            SessionNotCompleted => (StatusCode::CONFLICT, "session_not_completed"),
            NothingEvaluated(_) => (StatusCode::CONFLICT, "nothing_evaluated"),
            TaskIsTeamButFullSettingGiven(_) => (StatusCode::BAD_REQUEST, "task_is_team"),
            TaskIsSoloButSingleDialGiven(_) => (StatusCode::BAD_REQUEST, "task_is_solo"),
            OutOfBounds(_) => (StatusCode::BAD_REQUEST, "out_of_bounds"),
            InvalidPolicy(_) | Landscape(_) | Helper(_) => (StatusCode::BAD_REQUEST, "invalid_config"),
            ReplayMismatch { .. } | MalformedLog(_) => (StatusCode::INTERNAL_SERVER_ERROR, "replay_failure"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "persistence_failure", e.to_string())
    }
}

impl From<ExportError> for ApiError {
    fn from(e: ExportError) -> Self {
        let (status, code) = match e {
            ExportError::UnknownTask(_) => (StatusCode::NOT_FOUND, "unknown_task"),
            ExportError::TaskNotFinalized(_) => (StatusCode::CONFLICT, "task_not_finalized"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            v: PROTOCOL_VERSION,
            error: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn check_version(v: u32) -> Result<(), ApiError> {
    if v != PROTOCOL_VERSION {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "unsupported_version",
            format!("protocol version {v} is not supported; use {PROTOCOL_VERSION}"),
        ));
    }
    Ok(())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/evaluate", post(evaluate))
        .route("/v1/sessions/{id}/finalize", post(finalize))
        .route("/v1/sessions/{id}/bonus", get(bonus))
        .route("/v1/sessions/{id}/tasks/{task}/layers", get(layers))
        .with_state(state)
}

async fn health(State(app): State<Arc<AppState>>) -> Json<HealthResponse> {
    Json(HealthResponse {
        v: PROTOCOL_VERSION,
        status: "ok".into(),
        sessions: app.session_count().await,
    })
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    body: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(req) = body?;
    check_version(req.v)?;
    if req.participant_id.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "participant_id is empty"));
    }
    let seed = req.master_seed.unwrap_or(app.config.master_seed);
    let id = session_id_for(&req.participant_id, seed);
    let mut sessions = app.sessions.write().await;
    if sessions.contains_key(&id) || app.store.exists(&id) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "session_exists",
            format!("session {id} already exists"),
        ));
    }
    let session = Session::create(
        &req.participant_id,
        seed,
        req.treatment.map(Into::into),
        app.config.session.clone(),
    )?;
    app.store.append(&id, &session.events)?;
    let view = SessionView::of(&session);
    sessions.insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let session = app.session(&id).await.ok_or_else(|| ApiError::unknown_session(&id))?;
    let guard = session.lock().await;
    Ok(Json(SessionView::of(&guard)))
}

async fn evaluate(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<EvaluateRequest>, JsonRejection>,
) -> ApiResult<EvaluateResponse> {
    let Json(req) = body?;
    check_version(req.v)?;
    let input = match req.y {
        Some(y) => DialInput::Full(DialSetting::new(req.x, y)),
        None => DialInput::Left(req.x),
    };
    let session = app.session(&id).await.ok_or_else(|| ApiError::unknown_session(&id))?;
    let response = {
        let mut guard = session.lock().await;
        let evaluation = app.apply(&mut guard, |s| s.evaluate(input))?;
        EvaluateResponse {
            v: PROTOCOL_VERSION,
            task_index: guard.current_task,
            feedback: FeedbackRow::from(&evaluation),
            session: SessionView::of(&guard),
        }
    };
    if response.feedback.helper_dial.is_some() {
        app.helper_delay().await;
    }
    Ok(Json(response))
}

async fn finalize(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<FinalizeResponse> {
    let session = app.session(&id).await.ok_or_else(|| ApiError::unknown_session(&id))?;
    let mut guard = session.lock().await;
    let task_index = guard.current_task;
    let result = app.apply(&mut guard, |s| s.finalize())?;
    Ok(Json(FinalizeResponse {
        v: PROTOCOL_VERSION,
        task_index,
        choice: FinalChoice::from(&result),
        session: SessionView::of(&guard),
    }))
}

async fn bonus(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<BonusResponse> {
    let session = app.session(&id).await.ok_or_else(|| ApiError::unknown_session(&id))?;
    let guard = session.lock().await;
    Ok(Json(BonusResponse {
        v: PROTOCOL_VERSION,
        bonus: guard.bonus()?,
    }))
}

async fn layers(
    State(app): State<Arc<AppState>>,
    Path((id, task)): Path<(String, usize)>,
) -> ApiResult<LayersResponse> {
    let session = app.session(&id).await.ok_or_else(|| ApiError::unknown_session(&id))?;
    let guard = session.lock().await;
    let grid = export_layers(&guard, task)?.rounded();
    Ok(Json(LayersResponse {
        v: PROTOCOL_VERSION,
        session_id: id,
        task_index: task,
        grid,
    }))
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Persistence(#[from] StoreError),
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Recovers state from the store and serves until the process stops.
pub async fn serve(config: ServerConfig, addr: SocketAddr) -> Result<(), ServeError> {
    let state = AppState::recover(config)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    eprintln!(
        "rsl: serving {} session(s) from {} on http://{}",
        state.session_count().await,
        state.store.root().display(),
        listener.local_addr()?
    );
    axum::serve(listener, router(state)).await?;
    Ok(())
}
