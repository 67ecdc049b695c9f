//! HTTP+JSON API over sessions.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | `{"initial_theta": [..]}` (optional) | 201 `{session_id, concepts, theta}` |
//! | POST | `/sessions/{id}/turns` | `{"query": ".."}` | 200 turn result, or `{terminated: true}` |
//! | GET | `/sessions/{id}/state` | | 200 `{concepts, concept_ids, theta, round, terminated}` |
//! | GET | `/sessions/{id}/transcript` | | 200 `{session_id, turns, answers}` |
//! | POST | `/sessions/{id}/answers` | `{"item_id": "..", "selected_index": 0}` | 200 `{answer, theta}` |
//! | DELETE | `/sessions/{id}` | | 204 |
//!
//! Errors are `{code, message}`. A turn request for a session that is
//! already running a turn gets 409 with code `busy`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::Mutex;

use super::{
    create_session, persist_session, random_session_id, record_answer, run_turn, Clock, Session,
    SessionConfig, SessionError, TurnContext, TurnOutcome,
};
use crate::ceirt::KnowledgeState;
use crate::corpus::ItemBank;
use crate::gateway::LlmGateway;

type Shared = Arc<Mutex<Session>>;

/// Shared server state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    bank: Arc<ItemBank>,
    config: SessionConfig,
    gateway: Arc<dyn LlmGateway>,
    clock: Arc<dyn Clock>,
    sessions: Arc<RwLock<HashMap<String, Shared>>>,
    persist_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(
        bank: ItemBank,
        config: SessionConfig,
        gateway: Arc<dyn LlmGateway>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            bank: Arc::new(bank),
            config,
            gateway,
            clock,
            sessions: Arc::default(),
            persist_dir: None,
        }
    }

    /// Write `<dir>/<session_id>.json` after every change.
    pub fn with_persist_dir(mut self, dir: PathBuf) -> Self {
        self.persist_dir = Some(dir);
        self
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session map").len()
    }

    fn lookup(&self, id: &str) -> Result<Shared, ApiError> {
        self.sessions
            .read()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    fn persist(&self, session: &Session) -> Result<(), SessionError> {
        match &self.persist_dir {
            Some(dir) => {
                persist_session(session, &dir.join(format!("{}.json", session.session_id)))
            }
            None => Ok(()),
        }
    }
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

    fn not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no session `{id}`"),
        )
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::Gateway(_) => (StatusCode::BAD_GATEWAY, "gateway_error"),
            SessionError::Argument(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            SessionError::Terminated(_) => (StatusCode::CONFLICT, "terminated"),
            SessionError::Model(_) | SessionError::Guidance(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "model_error")
            }
            SessionError::Io { .. }
            | SessionError::Restore { .. }
            | SessionError::Schema { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "storage_error"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "code": self.code, "message": self.message })),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    initial_theta: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnRequest {
    query: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRequest {
    item_id: String,
    selected_index: usize,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", axum::routing::delete(remove))
        .route("/sessions/{id}/turns", post(turn))
        .route("/sessions/{id}/state", get(state_of))
        .route("/sessions/{id}/transcript", get(transcript))
        .route("/sessions/{id}/answers", post(answer))
        .with_state(state)
}

async fn create(State(app): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: CreateRequest = if body.iter().all(u8::is_ascii_whitespace) {
        CreateRequest::default()
    } else {
        parse_body(&body)?
    };
    let theta = req
        .initial_theta
        .map(KnowledgeState::new)
        .transpose()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let mut session = create_session(&app.bank, theta, app.config.clone(), app.clock.as_ref())
        .map_err(|e| match e {
            SessionError::Model(m) => ApiError::bad_request(m.to_string()),
            other => other.into(),
        })?;
    session.session_id = random_session_id();
    app.persist(&session)?;
    let reply = json!({
        "session_id": session.session_id,
        "concepts": session.concept_set.names(),
        "theta": session.theta,
    });
    app.sessions
        .write()
        .expect("session map")
        .insert(session.session_id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(reply)))
}

async fn turn(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let req: TurnRequest = parse_body(&body)?;
    let shared = app.lookup(&id)?;
    let mut guard = shared.try_lock_owned().map_err(|_| {
        ApiError::new(
            StatusCode::CONFLICT,
            "busy",
            format!("session `{id}` is already running a turn"),
        )
    })?;
    let worker = app.clone();
    let outcome = tokio::task::spawn_blocking(move || -> Result<TurnOutcome, SessionError> {
        let ctx = TurnContext {
            bank: &worker.bank,
            gateway: worker.gateway.as_ref(),
            clock: worker.clock.as_ref(),
        };
        let outcome = run_turn(&mut guard, ctx, &req.query)?;
        worker.persist(&guard)?;
        Ok(outcome)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(match outcome {
        TurnOutcome::Turn(result) => serde_json::to_value(*result).expect("turn result serializes"),
        TurnOutcome::Terminated => json!({ "session_id": id, "terminated": true }),
    }))
}

async fn state_of(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let shared = app.lookup(&id)?;
    let s = shared.lock().await;
    Ok(Json(json!({
        "session_id": s.session_id,
        "concepts": s.concept_set.names(),
        "concept_ids": s.concept_set.ids(),
        "theta": s.theta,
        "round": s.transcript.len(),
        "terminated": s.terminated,
    })))
}

async fn transcript(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let shared = app.lookup(&id)?;
    let s = shared.lock().await;
    Ok(Json(json!({
        "session_id": s.session_id,
        "turns": s.transcript,
        "answers": s.answers,
    })))
}

async fn answer(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let req: AnswerRequest = parse_body(&body)?;
    let shared = app.lookup(&id)?;
    let mut s = shared.lock().await;
    let record = record_answer(
        &mut s,
        &app.bank,
        app.clock.as_ref(),
        &req.item_id,
        req.selected_index,
    )?;
    app.persist(&s)?;
    Ok(Json(json!({ "answer": record, "theta": s.theta })))
}

async fn remove(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    app.sessions
        .write()
        .expect("session map")
        .remove(&id)
        .map(|_| StatusCode::NO_CONTENT)
        .ok_or_else(|| ApiError::not_found(&id))
}

/// Serves on an already bound listener until Ctrl-C.
pub async fn serve_on(listener: TcpListener, state: AppState) -> anyhow::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .context("server error")
}

/// Binds `bind` and serves until Ctrl-C.
pub async fn serve_api(state: AppState, bind: &str) -> anyhow::Result<()> {
    let listener = TcpListener::bind(bind)
        .await
        .with_context(|| format!("cannot bind {bind}"))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    serve_on(listener, state).await
}
