//! One task per session owns its state; everything else talks to it over a
//! channel, so events, ticks and log writes happen in a single order.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use tokio::sync::mpsc::error::TryRecvError;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::{Instant, MissedTickBehavior};
use twin_core::runtime::{replay, InteractionEvent, LogRecord, ResultsSummary, SessionState};
use twin_core::ScenarioDefinition;

use super::error::ApiError;
use super::protocol::{
    EventAck, Participant, Role, SessionRecord, SessionResults, SessionStatus, StateView,
    StreamMessage,
};
use super::store::Store;
use crate::log::{read_log, LogWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickMode {
    /// One tick per `tick_seconds` of wall time.
    Realtime,
    /// Tick whenever no command is waiting.
    Turbo,
    /// Only explicit tick requests advance time.
    Manual,
}

pub type Reply<T> = oneshot::Sender<Result<T, ApiError>>;

pub enum Command {
    Submit {
        client_id: Option<String>,
        event: InteractionEvent,
        reply: Reply<EventAck>,
    },
    Join {
        participant: Participant,
        reply: Reply<Participant>,
    },
    Subscribe {
        participant: Option<Participant>,
        reply: Reply<(Arc<str>, broadcast::Receiver<Arc<str>>)>,
    },
    State {
        reply: Reply<StateView>,
    },
    Ticks {
        count: u64,
        reply: Reply<(u64, SessionStatus)>,
    },
    Results {
        reply: Reply<SessionResults>,
    },
}

#[derive(Clone)]
pub struct SessionHandle {
    tx: mpsc::Sender<Command>,
}

impl SessionHandle {
    pub async fn call<T>(&self, make: impl FnOnce(Reply<T>) -> Command) -> Result<T, ApiError> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(make(reply))
            .await
            .map_err(|_| ApiError::Internal("session task has stopped".into()))?;
        rx.await
            .map_err(|_| ApiError::Internal("session task dropped the request".into()))?
    }
}

pub struct SessionConfig {
    pub mode: TickMode,
    pub max_ticks: Option<u64>,
    pub stream_buffer: usize,
}

pub struct Actor {
    record: SessionRecord,
    scenario: Arc<ScenarioDefinition>,
    state: SessionState,
    log: LogWriter,
    log_path: PathBuf,
    store: Arc<Store>,
    stream: broadcast::Sender<Arc<str>>,
    mode: TickMode,
    max_ticks: Option<u64>,
}

fn encode(m: &StreamMessage) -> Arc<str> {
    Arc::from(serde_json::to_string(m).expect("stream messages always encode"))
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::Internal(e.to_string())
}

impl Actor {
    /// Starts a session from its record, replaying whatever the log holds.
    pub fn spawn(
        store: Arc<Store>,
        mut record: SessionRecord,
        scenario: Arc<ScenarioDefinition>,
        cfg: &SessionConfig,
    ) -> Result<SessionHandle, ApiError> {
        let log_path = store.root().join(&record.log_path);
        let (log, records) = LogWriter::open(&log_path).map_err(internal)?;
        let fresh = SessionState::load(Arc::clone(&scenario))?;
        let state = replay(fresh, &records)?;
        if record.status == SessionStatus::Running && state.is_complete() {
            record.status = SessionStatus::Completed;
            store.write_record(&record)?;
        }
        let (stream, _) = broadcast::channel(cfg.stream_buffer.max(1));
        let (tx, rx) = mpsc::channel(256);
        let actor = Actor {
            record,
            scenario,
            state,
            log,
            log_path,
            store,
            stream,
            mode: cfg.mode,
            max_ticks: cfg.max_ticks,
        };
        tokio::spawn(actor.run(rx));
        Ok(SessionHandle { tx })
    }

    async fn run(mut self, mut rx: mpsc::Receiver<Command>) {
        let period = Duration::from_secs_f64(self.scenario.tick_seconds);
        let mut interval = tokio::time::interval_at(Instant::now() + period, period);
        interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
        loop {
            let ticking =
                self.record.status == SessionStatus::Running && self.mode != TickMode::Manual;
            if ticking && self.mode == TickMode::Turbo {
                match rx.try_recv() {
                    Ok(cmd) => self.handle(cmd),
                    Err(TryRecvError::Empty) => {
                        self.tick_once();
                        tokio::task::yield_now().await;
                    }
                    Err(TryRecvError::Disconnected) => break,
                }
            } else if ticking {
                tokio::select! {
                    cmd = rx.recv() => match cmd {
                        Some(cmd) => self.handle(cmd),
                        None => break,
                    },
                    _ = interval.tick() => self.tick_once(),
                }
            } else {
                match rx.recv().await {
                    Some(cmd) => self.handle(cmd),
                    None => break,
                }
            }
        }
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Submit {
                client_id,
                event,
                reply,
            } => {
                let _ = reply.send(self.submit(client_id, event));
            }
            Command::Join { participant, reply } => {
                let _ = reply.send(self.join(participant));
            }
            Command::Subscribe { participant, reply } => {
                let joined = match participant {
                    Some(p) => self.join(p).map(|_| ()),
                    None => Ok(()),
                };
                let _ = reply.send(joined.map(|()| {
                    let snapshot = encode(&StreamMessage::Snapshot {
                        status: self.record.status,
                        snapshot: self.state.snapshot(),
                    });
                    (snapshot, self.stream.subscribe())
                }));
            }
            Command::State { reply } => {
                let _ = reply.send(Ok(StateView {
                    session_id: self.record.session_id.clone(),
                    status: self.record.status,
                    participants: self.record.participants.clone(),
                    snapshot: self.state.snapshot(),
                }));
            }
            Command::Ticks { count, reply } => {
                for _ in 0..count {
                    if self.record.status != SessionStatus::Running {
                        break;
                    }
                    self.tick_once();
                }
                let _ = reply.send(Ok((self.state.tick_index(), self.record.status)));
            }
            Command::Results { reply } => {
                let _ = reply.send(self.results());
            }
        }
    }

    fn role_of(&self, client_id: &str) -> Option<Role> {
        self.record
            .participants
            .iter()
            .find(|p| p.client_id == client_id)
            .map(|p| p.role)
    }

    fn join(&mut self, p: Participant) -> Result<Participant, ApiError> {
        match self.role_of(&p.client_id) {
            Some(role) if role == p.role => Ok(p),
            Some(_) => Err(ApiError::BadRequest(format!(
                "client `{}` already joined with another role",
                p.client_id
            ))),
            None => {
                self.record.participants.push(p.clone());
                self.store.write_record(&self.record)?;
                Ok(p)
            }
        }
    }

    fn submit(
        &mut self,
        client_id: Option<String>,
        event: InteractionEvent,
    ) -> Result<EventAck, ApiError> {
        if self.record.status != SessionStatus::Running {
            return Err(ApiError::NotRunning(self.record.status));
        }
        if let Some(id) = client_id {
            match self.role_of(&id) {
                Some(Role::Observer) => return Err(ApiError::ObserverWrite),
                Some(Role::Participant) => {}
                None => {
                    self.join(Participant {
                        client_id: id,
                        role: Role::Participant,
                    })?;
                }
            }
        }
        let outcome = self.state.apply_event(event.clone())?;
        let record = LogRecord::Event {
            ordinal: outcome.ordinal,
            tick: outcome.tick,
            event: event.clone(),
        };
        if let Err(e) = self.log.append(&record, true) {
            self.finish(
                SessionStatus::Aborted,
                Some(format!("log write failed: {e}")),
            );
            return Err(internal(e));
        }
        let _ = self.stream.send(encode(&StreamMessage::Delta {
            ordinal: outcome.ordinal,
            tick: outcome.tick,
            event,
            delta: outcome.delta.clone(),
        }));
        if self.state.is_complete() {
            self.finish(SessionStatus::Completed, None);
        }
        Ok(EventAck {
            ordinal: outcome.ordinal,
            tick: outcome.tick,
            delta: outcome.delta,
        })
    }

    fn tick_once(&mut self) {
        let frame = match self.state.tick() {
            Ok(f) => f,
            Err(e) => {
                self.finish(SessionStatus::Aborted, Some(format!("tick failed: {e}")));
                return;
            }
        };
        if let Err(e) = self.log.append(
            &LogRecord::Tick {
                tick: frame.tick_index,
            },
            false,
        ) {
            self.finish(
                SessionStatus::Aborted,
                Some(format!("log write failed: {e}")),
            );
            return;
        }
        let _ = self.stream.send(encode(&StreamMessage::Frame { frame }));
        if self.state.is_complete() {
            self.finish(SessionStatus::Completed, None);
        } else if self.max_ticks.is_some_and(|m| self.state.tick_index() >= m) {
            self.finish(SessionStatus::Aborted, Some("tick limit reached".into()));
        }
    }

    fn finish(&mut self, status: SessionStatus, reason: Option<String>) {
        if self.record.status != SessionStatus::Running {
            return;
        }
        self.record.status = status;
        self.record.reason = reason.clone();
        if let Err(e) = self.store.write_record(&self.record) {
            tracing::error!(session = %self.record.session_id, "could not persist status: {e}");
        }
        let _ = self
            .stream
            .send(encode(&StreamMessage::Status { status, reason }));
    }

    /// Rebuilt from the log file, not from memory.
    fn results(&self) -> Result<SessionResults, ApiError> {
        let records = read_log(&self.log_path).map_err(internal)?;
        let fresh = SessionState::load(Arc::clone(&self.scenario))?;
        let replayed = replay(fresh, &records)?;
        Ok(SessionResults {
            session_id: self.record.session_id.clone(),
            status: self.record.status,
            summary: ResultsSummary::of(&replayed),
        })
    }
}
