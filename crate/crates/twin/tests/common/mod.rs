#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use twin::service::{router, AppState, ServiceConfig, TickMode};
use twin_core::runtime::LogRecord;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_bytes() -> Vec<u8> {
    std::fs::read(fixtures_dir().join("electrical_lab.twin.json")).unwrap()
}

pub fn golden_records() -> Vec<LogRecord> {
    twin::log::read_log(&fixtures_dir().join("electrical_lab.golden.jsonl")).unwrap()
}

pub fn golden_hash() -> String {
    std::fs::read_to_string(fixtures_dir().join("electrical_lab.golden.hash"))
        .unwrap()
        .trim()
        .to_string()
}

/// Starts an in-process server on an ephemeral port.
pub async fn start(data: &Path, mode: TickMode, max_ticks: Option<u64>) -> SocketAddr {
    let mut cfg = ServiceConfig::new(data);
    cfg.mode = mode;
    cfg.max_ticks = max_ticks;
    let state = AppState::open(cfg).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await });
    addr
}

pub struct Client {
    pub base: String,
    pub http: reqwest::Client,
}

impl Client {
    pub fn new(addr: SocketAddr) -> Self {
        Self {
            base: format!("http://{addr}"),
            http: reqwest::Client::new(),
        }
    }

    pub async fn post(&self, path: &str, body: serde_json::Value) -> (u16, serde_json::Value) {
        let r = self
            .http
            .post(format!("{}{path}", self.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(serde_json::Value::Null))
    }

    pub async fn get(&self, path: &str) -> (u16, serde_json::Value) {
        let r = self
            .http
            .get(format!("{}{path}", self.base))
            .send()
            .await
            .unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(serde_json::Value::Null))
    }

    pub async fn upload(&self, bytes: Vec<u8>) -> (u16, serde_json::Value) {
        let r = self
            .http
            .post(format!("{}/scenarios", self.base))
            .body(bytes)
            .send()
            .await
            .unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(serde_json::Value::Null))
    }

    /// Uploads the fixture and opens a session on it.
    pub async fn fixture_session(&self) -> String {
        let (status, body) = self.upload(fixture_bytes()).await;
        assert_eq!(status, 200, "{body}");
        let (status, body) = self
            .post(
                "/sessions",
                serde_json::json!({ "scenario_id": body["scenario_id"] }),
            )
            .await;
        assert_eq!(status, 200, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }
}
