//! HTTP and WebSocket front end for concurrent sessions.

mod error;
pub mod protocol;
mod session;
mod store;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio::sync::broadcast::error::RecvError;
use twin_core::runtime::SessionState;

pub use error::ApiError;
pub use session::TickMode;

use protocol::{
    CreateSession, EventAck, Participant, Role, ScenarioCreated, SessionCreated, SessionRecord,
    SessionResults, SessionStatus, StateView, StreamMessage, StreamRequest, SubmitEvent,
    TickRequest, TickResponse,
};
use session::{Actor, Command, SessionConfig, SessionHandle};
use store::Store;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub mode: TickMode,
    pub max_ticks: Option<u64>,
    /// Messages buffered per stream subscriber before it is dropped.
    pub stream_buffer: usize,
    /// Static files served at `/`.
    pub ui_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            mode: TickMode::Realtime,
            max_ticks: None,
            stream_buffer: 4096,
            ui_dir: None,
        }
    }

    fn session_config(&self) -> SessionConfig {
        SessionConfig {
            mode: self.mode,
            max_ticks: self.max_ticks,
            stream_buffer: self.stream_buffer,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServiceConfig,
    store: Arc<Store>,
    sessions: RwLock<HashMap<String, SessionHandle>>,
}

impl AppState {
    /// Opens the data directory and resumes every stored session from its
    /// log. Must run inside a Tokio runtime.
    pub fn open(config: ServiceConfig) -> anyhow::Result<Self> {
        let store = Arc::new(Store::open(&config.data_dir)?);
        let mut sessions = HashMap::new();
        for record in store.records() {
            let record = match record {
                Ok(r) => r,
                Err(e) => {
                    tracing::warn!("skipping session: {e}");
                    continue;
                }
            };
            let resumed = store.scenario(&record.scenario_id).and_then(|s| {
                Actor::spawn(
                    Arc::clone(&store),
                    record.clone(),
                    s,
                    &config.session_config(),
                )
            });
            match resumed {
                Ok(handle) => {
                    sessions.insert(record.session_id.clone(), handle);
                }
                Err(e) => tracing::warn!(session = %record.session_id, "cannot resume: {e}"),
            }
        }
        tracing::info!(count = sessions.len(), "resumed sessions");
        Ok(Self {
            inner: Arc::new(Inner {
                config,
                store,
                sessions: RwLock::new(sessions),
            }),
        })
    }

    fn session(&self, id: &str) -> Result<SessionHandle, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.to_string()))
    }

    pub fn create_session(&self, scenario_id: &str) -> Result<String, ApiError> {
        let scenario = self.inner.store.scenario(scenario_id)?;
        SessionState::load(Arc::clone(&scenario))?;
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        let record = SessionRecord {
            session_id: session_id.clone(),
            scenario_id: scenario_id.to_string(),
            created_at,
            participants: Vec::new(),
            status: SessionStatus::Running,
            reason: None,
            log_path: format!("sessions/{session_id}/log.jsonl"),
        };
        self.inner.store.write_record(&record)?;
        let handle = Actor::spawn(
            Arc::clone(&self.inner.store),
            record,
            scenario,
            &self.inner.config.session_config(),
        )?;
        self.inner
            .sessions
            .write()
            .expect("lock")
            .insert(session_id.clone(), handle);
        Ok(session_id)
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/scenarios", post(upload_scenario))
        .route("/scenarios/{id}", get(get_scenario))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/events", post(submit_event))
        .route("/sessions/{id}/participants", post(join))
        .route("/sessions/{id}/ticks", post(run_ticks))
        .route("/sessions/{id}/results", get(get_results))
        .route("/sessions/{id}/stream", get(stream));
    let api = match &state.inner.config.ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    };
    api.with_state(state)
}

/// Serves until the listener fails or the process exits.
pub async fn serve(config: ServiceConfig, listener: TcpListener) -> anyhow::Result<()> {
    let state = AppState::open(config)?;
    axum::serve(listener, router(state)).await?;
    Ok(())
}

async fn upload_scenario(
    State(app): State<AppState>,
    body: Bytes,
) -> Result<Json<ScenarioCreated>, ApiError> {
    let store = Arc::clone(&app.inner.store);
    let scenario_id = tokio::task::spawn_blocking(move || store.put_scenario(&body))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(ScenarioCreated { scenario_id }))
}

async fn get_scenario(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let bytes = app.inner.store.scenario_bytes(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn create_session(
    State(app): State<AppState>,
    Json(req): Json<CreateSession>,
) -> Result<Json<SessionCreated>, ApiError> {
    let session_id = app.create_session(&req.scenario_id)?;
    Ok(Json(SessionCreated { session_id }))
}

async fn get_state(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<StateView>, ApiError> {
    let s = app.session(&id)?;
    Ok(Json(s.call(|reply| Command::State { reply }).await?))
}

async fn submit_event(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<SubmitEvent>,
) -> Result<Json<EventAck>, ApiError> {
    let s = app.session(&id)?;
    let ack = s
        .call(|reply| Command::Submit {
            client_id: req.client_id,
            event: req.event,
            reply,
        })
        .await?;
    Ok(Json(ack))
}

async fn join(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(participant): Json<Participant>,
) -> Result<Json<Participant>, ApiError> {
    let s = app.session(&id)?;
    Ok(Json(
        s.call(|reply| Command::Join { participant, reply }).await?,
    ))
}

async fn run_ticks(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<TickRequest>,
) -> Result<Json<TickResponse>, ApiError> {
    let s = app.session(&id)?;
    let (tick_index, status) = s
        .call(|reply| Command::Ticks {
            count: req.count,
            reply,
        })
        .await?;
    Ok(Json(TickResponse { tick_index, status }))
}

async fn get_results(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionResults>, ApiError> {
    let s = app.session(&id)?;
    Ok(Json(s.call(|reply| Command::Results { reply }).await?))
}

#[derive(Debug, Deserialize)]
struct StreamQuery {
    role: Option<Role>,
    client_id: Option<String>,
}

async fn stream(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let s = app.session(&id)?;
    let participant = Participant {
        client_id: q
            .client_id
            .unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string()),
        role: q.role.unwrap_or(Role::Participant),
    };
    let (snapshot, rx) = s
        .call(|reply| Command::Subscribe {
            participant: Some(participant.clone()),
            reply,
        })
        .await?;
    Ok(ws.on_upgrade(move |socket| pump(socket, s, participant, snapshot, rx)))
}

async fn pump(
    socket: WebSocket,
    session: SessionHandle,
    who: Participant,
    snapshot: Arc<str>,
    mut rx: tokio::sync::broadcast::Receiver<Arc<str>>,
) {
    let (mut tx, mut incoming) = socket.split();
    if tx
        .send(Message::Text(snapshot.as_ref().into()))
        .await
        .is_err()
    {
        return;
    }
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(text) => {
                    if tx.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(RecvError::Lagged(n)) => {
                    tracing::info!(client = %who.client_id, skipped = n, "dropping slow subscriber");
                    let _ = tx.send(Message::Close(None)).await;
                    break;
                }
                Err(RecvError::Closed) => break,
            },
            msg = incoming.next() => match msg {
                Some(Ok(Message::Text(text))) => {
                    let reply = handle_stream_request(&session, &who, text.as_str()).await;
                    let text = serde_json::to_string(&reply).expect("stream messages always encode");
                    if tx.send(Message::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn handle_stream_request(
    session: &SessionHandle,
    who: &Participant,
    text: &str,
) -> StreamMessage {
    let result = match serde_json::from_str::<StreamRequest>(text) {
        Err(e) => Err(ApiError::BadRequest(e.to_string())),
        Ok(_) if who.role == Role::Observer => Err(ApiError::ObserverWrite),
        Ok(req) => {
            session
                .call(|reply| Command::Submit {
                    client_id: Some(who.client_id.clone()),
                    event: req.event,
                    reply,
                })
                .await
        }
    };
    match result {
        Ok(ack) => StreamMessage::Ack {
            ordinal: ack.ordinal,
            tick: ack.tick,
        },
        Err(e) => StreamMessage::Error {
            status: e.status().as_u16(),
            body: e.body(),
        },
    }
}
