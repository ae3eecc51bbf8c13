//! HTTP control plane and WebSocket streaming for live sessions.
//!
//! Each session is owned by one actor task. HTTP handlers and sockets talk
//! to it through a command channel; everything it emits goes out on a
//! broadcast channel shared by all sockets of that session. Text jobs run on
//! the blocking pool and report back through the same command channel, so
//! the session itself is only ever touched by its actor.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use storyplay_core::pipelines::StorySettings;
use storyplay_core::session::{
    write_jsonl, ClientMessage, Engine, JobCompletion, ServerEvent, ServerMessage, Session, SessionConfig, StoryExport,
};
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::MissedTickBehavior;

const COMMAND_QUEUE: usize = 256;
const BROADCAST_QUEUE: usize = 1024;

enum Command {
    Client(ClientMessage),
    Reject(String),
    Subscribe(oneshot::Sender<broadcast::Receiver<ServerMessage>>),
    GetSettings(oneshot::Sender<StorySettings>),
    PutSettings(StorySettings, oneshot::Sender<Result<StorySettings, String>>),
    Export(oneshot::Sender<StoryExport>),
    JobDone(JobCompletion),
}

#[derive(Clone)]
struct SessionHandle {
    commands: mpsc::Sender<Command>,
}

pub struct AppState {
    engine: Arc<Engine>,
    config: SessionConfig,
    log_dir: Option<PathBuf>,
    sessions: Mutex<HashMap<String, SessionHandle>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, config: SessionConfig, log_dir: Option<PathBuf>) -> anyhow::Result<Arc<Self>> {
        config.validate()?;
        if let Some(dir) = &log_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Arc::new(AppState { engine, config, log_dir, sessions: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1) }))
    }

    fn new_id(&self) -> String {
        let n = self.next_id.fetch_add(1, Ordering::Relaxed);
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        format!("{stamp:x}-{n}")
    }

    fn handle(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.lock().expect("session map lock").get(id).cloned()
    }

    /// Creates a session and starts its actor. Must run inside a tokio runtime.
    pub fn open(&self, settings: Option<StorySettings>) -> anyhow::Result<String> {
        let id = self.new_id();
        let session = Session::with_settings(
            id.clone(),
            self.config.clone(),
            settings.unwrap_or_default(),
            self.engine.clone(),
        )?;
        let log = match &self.log_dir {
            Some(dir) => Some(BufWriter::new(
                OpenOptions::new().create(true).append(true).open(dir.join(format!("{id}.jsonl")))?,
            )),
            None => None,
        };
        let (tx, rx) = mpsc::channel(COMMAND_QUEUE);
        tokio::spawn(run_actor(session, rx, tx.clone(), log));
        self.sessions.lock().expect("session map lock").insert(id.clone(), SessionHandle { commands: tx });
        tracing::info!(session = %id, "session opened");
        Ok(id)
    }
}

struct Actor {
    session: Session,
    events: broadcast::Sender<ServerMessage>,
    commands: mpsc::Sender<Command>,
    log: Option<BufWriter<File>>,
    epoch: Instant,
}

impl Actor {
    fn now_ms(&self) -> u64 {
        self.epoch.elapsed().as_millis() as u64
    }

    /// Broadcasts output, persists new log entries and dispatches any job.
    fn publish(&mut self, out: Vec<ServerMessage>) {
        for m in out {
            // No receivers is fine: nobody is watching.
            let _ = self.events.send(m);
        }
        let fresh = self.session.take_new_log_entries();
        if let Some(w) = self.log.as_mut() {
            let written = write_jsonl(fresh, &mut *w).and_then(|()| Ok(w.flush()?));
            if let Err(e) = written {
                tracing::warn!(session = %self.session.id(), "log write failed: {e}");
            }
        }
        if let Some(spec) = self.session.take_job() {
            let engine = self.session.engine().clone();
            let back = self.commands.clone();
            tokio::spawn(async move {
                let done = match tokio::task::spawn_blocking(move || engine.run(&spec)).await {
                    Ok(done) => done,
                    Err(e) => {
                        tracing::error!("text job panicked: {e}");
                        return;
                    }
                };
                let _ = back.send(Command::JobDone(done)).await;
            });
        }
    }

    fn command(&mut self, cmd: Command) {
        let now = self.now_ms();
        match cmd {
            Command::Client(msg) => {
                let out = self.session.handle(msg, now);
                self.publish(out);
            }
            Command::Reject(reason) => {
                let out = self.session.reject(reason, now);
                self.publish(out);
            }
            Command::Subscribe(reply) => {
                // Subscribe before the snapshot goes out so the new client
                // sees it and everything after it.
                let rx = self.events.subscribe();
                let _ = reply.send(rx);
                let out = self.session.snapshot(now);
                self.publish(out);
            }
            Command::GetSettings(reply) => {
                let _ = reply.send(self.session.settings().clone());
            }
            Command::PutSettings(settings, reply) => {
                let out = self.session.replace_settings(settings, now);
                let result = match out.iter().find_map(|m| match &m.event {
                    ServerEvent::Error { message } => Some(message.clone()),
                    _ => None,
                }) {
                    Some(err) => Err(err),
                    None => Ok(self.session.settings().clone()),
                };
                self.publish(out);
                let _ = reply.send(result);
            }
            Command::Export(reply) => {
                let _ = reply.send(self.session.export());
            }
            Command::JobDone(done) => {
                let out = self.session.complete_job(done, now);
                self.publish(out);
            }
        }
    }
}

async fn run_actor(
    session: Session,
    mut rx: mpsc::Receiver<Command>,
    commands: mpsc::Sender<Command>,
    log: Option<BufWriter<File>>,
) {
    let tick = Duration::from_millis(session.config().tick_ms());
    let (events, _) = broadcast::channel(BROADCAST_QUEUE);
    let mut actor = Actor { session, events, commands, log, epoch: Instant::now() };
    actor.publish(Vec::new());
    let mut ticks = tokio::time::interval(tick);
    ticks.set_missed_tick_behavior(MissedTickBehavior::Skip);
    loop {
        tokio::select! {
            cmd = rx.recv() => match cmd {
                Some(cmd) => actor.command(cmd),
                None => break,
            },
            _ = ticks.tick() => {
                if !actor.session.is_idle() {
                    let now = actor.now_ms();
                    let out = actor.session.tick(now);
                    actor.publish(out);
                }
            }
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/session", post(create_session))
        .route("/session/{id}/settings", get(get_settings).put(put_settings))
        .route("/session/{id}/export", get(export))
        .route("/session/{id}/ws", get(ws_upgrade))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("no session `{id}`"))
}

fn gone() -> Response {
    error(StatusCode::INTERNAL_SERVER_ERROR, "session actor stopped")
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    settings: Option<StorySettings>,
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
        }
    };
    match state.open(req.settings) {
        Ok(id) => (StatusCode::CREATED, Json(json!({ "session": id }))).into_response(),
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    }
}

async fn ask<T>(handle: &SessionHandle, make: impl FnOnce(oneshot::Sender<T>) -> Command) -> Option<T> {
    let (tx, rx) = oneshot::channel();
    handle.commands.send(make(tx)).await.ok()?;
    rx.await.ok()
}

async fn get_settings(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let Some(h) = state.handle(&id) else { return not_found(&id) };
    match ask(&h, Command::GetSettings).await {
        Some(s) => Json(s).into_response(),
        None => gone(),
    }
}

async fn put_settings(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Response {
    let Some(h) = state.handle(&id) else { return not_found(&id) };
    let settings: StorySettings = match serde_json::from_slice(&body) {
        Ok(s) => s,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    match ask(&h, |tx| Command::PutSettings(settings, tx)).await {
        Some(Ok(s)) => Json(s).into_response(),
        Some(Err(e)) => error(StatusCode::UNPROCESSABLE_ENTITY, e),
        None => gone(),
    }
}

async fn export(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let Some(h) = state.handle(&id) else { return not_found(&id) };
    match ask(&h, Command::Export).await {
        Some(e) => Json(e).into_response(),
        None => gone(),
    }
}

async fn ws_upgrade(State(state): State<Arc<AppState>>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Response {
    let Some(h) = state.handle(&id) else { return not_found(&id) };
    ws.on_upgrade(move |socket| stream(socket, h))
}

async fn stream(mut socket: WebSocket, handle: SessionHandle) {
    let Some(mut events) = ask(&handle, Command::Subscribe).await else { return };
    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let cmd = match incoming {
                    Some(Ok(Message::Text(text))) => match serde_json::from_str::<ClientMessage>(text.as_str()) {
                        Ok(msg) => Command::Client(msg),
                        Err(e) => Command::Reject(format!("invalid message: {e}")),
                    },
                    Some(Ok(Message::Binary(_))) => Command::Reject("binary frames are not supported".into()),
                    Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                };
                if handle.commands.send(cmd).await.is_err() {
                    break;
                }
            }
            outgoing = events.recv() => match outgoing {
                Ok(msg) => {
                    let text = serde_json::to_string(&msg).expect("server messages serialize");
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    // The client lost messages; make it reconnect for a fresh snapshot.
                    tracing::warn!("socket lagged by {n} messages; closing");
                    let _ = socket.send(Message::Close(None)).await;
                    break;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            }
        }
    }
}
