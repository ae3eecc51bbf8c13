#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::Value;
use storyplay_cli::config::ServiceConfig;
use storyplay_cli::server::{self, AppState};
use storyplay_core::session::{ServerEvent, ServerMessage, SessionConfig, OFFLINE_TOKEN_DIM};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub const DIM: usize = 16;
pub const SEED: u64 = 7;

/// Offline engine settings that a replay can rebuild exactly.
pub fn service_config(session: SessionConfig, log_dir: Option<PathBuf>) -> ServiceConfig {
    let mut c = ServiceConfig { session, ..ServiceConfig::default() };
    c.providers.embedding_dim = DIM;
    c.providers.token_dim = OFFLINE_TOKEN_DIM;
    c.providers.seed = SEED;
    c.models.seed = SEED;
    c.server.log_dir = log_dir;
    c
}

pub fn fast_session() -> SessionConfig {
    SessionConfig { stop_window_ms: 200, text_first_frames: 6, ..SessionConfig::default() }
}

pub struct TestServer {
    pub base: String,
    pub ws_base: String,
}

pub async fn start(config: &ServiceConfig) -> TestServer {
    let engine = Arc::new(config.build_engine().unwrap());
    let state = AppState::new(engine, config.session.clone(), config.server.log_dir.clone()).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(server::serve(state, listener));
    TestServer { base: format!("http://{addr}"), ws_base: format!("ws://{addr}") }
}

/// Blocking HTTP on the blocking pool; returns status and JSON body
/// (`Value::Null` for an empty or non-JSON body).
pub async fn http(method: &'static str, url: String, body: Option<Value>) -> (u16, Value) {
    tokio::task::spawn_blocking(move || {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        let resp = match (method, body) {
            ("GET", _) => agent.get(&url).call(),
            ("POST", Some(b)) => agent.post(&url).send_json(&b),
            ("POST", None) => agent.post(&url).send_empty(),
            ("PUT", Some(b)) => agent.put(&url).send_json(&b),
            ("PUT", None) => agent.put(&url).send_empty(),
            _ => panic!("unsupported method {method}"),
        };
        let mut resp = resp.unwrap();
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::Null))
    })
    .await
    .unwrap()
}

pub async fn open_session(server: &TestServer) -> String {
    let (status, body) = http("POST", format!("{}/session", server.base), None).await;
    assert_eq!(status, 201, "{body}");
    body["session"].as_str().unwrap().to_string()
}

pub async fn connect(server: &TestServer, id: &str) -> Ws {
    tokio_tungstenite::connect_async(format!("{}/session/{id}/ws", server.ws_base)).await.unwrap().0
}

pub async fn send(ws: &mut Ws, value: Value) {
    ws.send(Message::Text(value.to_string().into())).await.unwrap();
}

pub async fn send_raw(ws: &mut Ws, text: &str) {
    ws.send(Message::Text(text.to_string().into())).await.unwrap();
}

pub async fn next(ws: &mut Ws) -> ServerMessage {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("timed out waiting for a server message")
            .expect("socket closed")
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

/// Reads until `pred` matches, keeping everything seen in `seen`.
pub async fn until(ws: &mut Ws, seen: &mut Vec<ServerMessage>, pred: impl Fn(&ServerEvent) -> bool) -> ServerMessage {
    loop {
        let m = next(ws).await;
        seen.push(m.clone());
        if pred(&m.event) {
            return m;
        }
    }
}

pub fn assert_contiguous(seen: &[ServerMessage], session: &str) {
    for w in seen.windows(2) {
        assert_eq!(w[1].seq, w[0].seq + 1, "gap between {:?} and {:?}", w[0], w[1]);
    }
    assert!(seen.iter().all(|m| m.session == session));
}
