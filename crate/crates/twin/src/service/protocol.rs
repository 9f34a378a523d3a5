//! Wire types shared by the HTTP and stream endpoints.

use serde::{Deserialize, Serialize};
use twin_core::runtime::{
    InteractionEvent, ResultsSummary, SessionSnapshot, StateDelta, TelemetryFrame,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Participant,
    Observer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub client_id: String,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    Completed,
    Aborted,
}

/// Contents of `sessions/<id>/meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub scenario_id: String,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pub participants: Vec<Participant>,
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Relative to the data directory.
    pub log_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioCreated {
    pub scenario_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub scenario_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitEvent {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_id: Option<String>,
    pub event: InteractionEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAck {
    pub ordinal: u64,
    pub tick: u64,
    pub delta: StateDelta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TickRequest {
    pub count: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TickResponse {
    pub tick_index: u64,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub session_id: String,
    pub status: SessionStatus,
    pub participants: Vec<Participant>,
    #[serde(flatten)]
    pub snapshot: SessionSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResults {
    pub session_id: String,
    pub status: SessionStatus,
    #[serde(flatten)]
    pub summary: ResultsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<twin_core::ValidationReport>,
}

/// Messages on the session stream, server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamMessage {
    Snapshot {
        status: SessionStatus,
        snapshot: SessionSnapshot,
    },
    Delta {
        ordinal: u64,
        tick: u64,
        event: InteractionEvent,
        delta: StateDelta,
    },
    Frame {
        frame: TelemetryFrame,
    },
    Status {
        status: SessionStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    /// Reply to an event sent on this stream.
    Ack {
        ordinal: u64,
        tick: u64,
    },
    Error {
        status: u16,
        #[serde(flatten)]
        body: ErrorBody,
    },
}

/// Client to server on the stream: an event to apply.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamRequest {
    pub event: InteractionEvent,
}
