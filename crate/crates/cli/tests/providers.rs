//! Remote providers against a local mock of the embedding and generation
//! endpoints.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use storyplay_cli::config::{EmbeddingsKind, GeneratorKind, ServiceConfig, TokensKind};
use storyplay_core::motion::Character;
use storyplay_core::pipelines::SOFT_PROMPT_ROWS;
use storyplay_core::session::{ClientEvent, ClientMessage, ServerEvent, Session, SessionConfig};

const DIM: usize = 8;
const TOKEN_DIM: usize = 6;

#[derive(Default)]
struct Mock {
    generate_requests: Mutex<Vec<Value>>,
    embed_calls: Mutex<usize>,
    fail_generate: AtomicBool,
    wrong_width: AtomicBool,
}

/// Deterministic non-zero vector per text.
fn vector(text: &str, dim: usize) -> Vec<f64> {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.to_lowercase().bytes() {
        h = (h ^ b as u64).wrapping_mul(0x100000001b3);
    }
    (0..dim)
        .map(|i| {
            let x = h.rotate_left(7 * i as u32 + 1) % 2000;
            x as f64 / 1000.0 - 1.0 + if i == 0 { 2.5 } else { 0.0 }
        })
        .collect()
}

async fn embed(State(m): State<Arc<Mock>>, Json(req): Json<Value>) -> Json<Value> {
    *m.embed_calls.lock().unwrap() += 1;
    let dim = if m.wrong_width.load(Ordering::SeqCst) { DIM + 1 } else { DIM };
    let vectors: Vec<Vec<f64>> = req["texts"].as_array().unwrap().iter().map(|t| vector(t.as_str().unwrap(), dim)).collect();
    Json(json!({ "dimension": dim, "vectors": vectors }))
}

async fn tokens(Json(req): Json<Value>) -> Json<Value> {
    let term = req["term"].as_str().unwrap();
    let pad_to = req["pad_to"].as_u64().unwrap() as usize;
    let rows: Vec<Vec<f64>> = (0..pad_to).map(|i| vector(&format!("{term}#{i}"), TOKEN_DIM)).collect();
    Json(json!({ "dimension": TOKEN_DIM, "rows": rows }))
}

async fn generate(State(m): State<Arc<Mock>>, Json(req): Json<Value>) -> Result<Json<Value>, StatusCode> {
    m.generate_requests.lock().unwrap().push(req.clone());
    if m.fail_generate.load(Ordering::SeqCst) {
        return Err(StatusCode::SERVICE_UNAVAILABLE);
    }
    // The active-character question is asked greedily.
    let text = if req["temperature"].as_f64() == Some(0.0) { "1" } else { "Tom tickles Mia." };
    Ok(Json(json!({ "text": text })))
}

/// Runs the mock on its own runtime thread; the providers under test are
/// blocking clients.
fn start_mock() -> (String, Arc<Mock>) {
    let mock = Arc::new(Mock::default());
    let app = Router::new()
        .route("/embed", post(embed))
        .route("/token_embeddings", post(tokens))
        .route("/generate", post(generate))
        .with_state(mock.clone());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (format!("http://{}", rx.recv().unwrap()), mock)
}

fn remote_config(endpoint: &str, generator: GeneratorKind) -> ServiceConfig {
    let mut c = ServiceConfig::default();
    c.providers.embeddings = EmbeddingsKind::Remote;
    c.providers.embedding_dim = DIM;
    c.providers.tokens = TokensKind::Remote;
    c.providers.token_dim = TOKEN_DIM;
    c.providers.generator = generator;
    c.providers.endpoint = Some(endpoint.to_string());
    c.providers.timeout_ms = 5_000;
    c
}

fn msg(event: ClientEvent) -> ClientMessage {
    ClientMessage { seq: None, session: None, event }
}

/// Drags sym0 for a few ticks, releases, and lets stop detection fire.
fn drag_and_stop(s: &mut Session) -> u64 {
    let mut now = 0;
    for i in 0..5 {
        s.handle(msg(ClientEvent::PointerFrame { character: Character::Sym0, x: 0.2 + 0.05 * i as f64, y: 0.4, r: 0.0 }), now);
        s.tick(now);
        now += 100;
    }
    s.handle(msg(ClientEvent::PointerRelease { character: None }), now);
    s.tick(now + 600);
    now + 600
}

#[test]
fn remote_providers_drive_text_and_motion() {
    let (endpoint, mock) = start_mock();
    let engine = Arc::new(remote_config(&endpoint, GeneratorKind::Remote).build_engine().unwrap());
    assert_eq!(engine.lexicon.dimension(), DIM);
    let mut s = Session::new("remote", SessionConfig::default(), engine).unwrap();

    s.handle(msg(ClientEvent::SetAuto { auto: false }), 0);
    s.handle(msg(ClientEvent::WriteText { segment: None, text: "Tom tickles Mia.".into() }), 0);
    let out = s.run_pending_job(10);
    assert!(out.iter().any(|m| matches!(m.event, ServerEvent::ActionPreview { active: Character::Sym1, .. })), "{out:?}");
    assert_eq!(s.segments()[0].conditioning.as_ref().unwrap().active, Character::Sym1);

    s.handle(msg(ClientEvent::SetAuto { auto: true }), 20);
    s.handle(msg(ClientEvent::DeleteAfter { frame: 0 }), 20);
    let now = drag_and_stop(&mut s);
    let out = s.run_pending_job(now);
    assert!(out.iter().any(|m| matches!(&m.event, ServerEvent::TextReady { text, .. } if text == "Tom tickles Mia.")), "{out:?}");

    let requests = mock.generate_requests.lock().unwrap();
    let story = requests.iter().find(|r| r["temperature"].as_f64() == Some(0.7)).expect("a story request");
    let blocks: Vec<&Value> = story["segments"].as_array().unwrap().iter().filter(|s| s["type"] == "vectors").collect();
    assert_eq!(blocks.len(), 1);
    let rows = blocks[0]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), SOFT_PROMPT_ROWS);
    assert!(rows.iter().all(|r| r.as_array().unwrap().len() == TOKEN_DIM));
    assert!(blocks[0].get("terms").is_none(), "blended terms stay local");
    let char_req = requests.iter().find(|r| r["temperature"].as_f64() == Some(0.0)).expect("a character request");
    assert!(char_req["segments"].as_array().unwrap().iter().any(|s| s["type"] == "vectors"));
}

#[test]
fn text_only_generator_receives_plain_text() {
    let (endpoint, mock) = start_mock();
    let engine = Arc::new(remote_config(&endpoint, GeneratorKind::RemoteTextOnly).build_engine().unwrap());
    let mut s = Session::new("text-only", SessionConfig::default(), engine).unwrap();
    let now = drag_and_stop(&mut s);
    let out = s.run_pending_job(now);
    assert!(out.iter().any(|m| matches!(m.event, ServerEvent::TextReady { .. })), "{out:?}");
    let requests = mock.generate_requests.lock().unwrap();
    assert!(!requests.is_empty());
    for r in requests.iter() {
        let segs = r["segments"].as_array().unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0]["type"], "text");
        assert!(!segs[0]["value"].as_str().unwrap().contains("<action>"));
    }
}

#[test]
fn generator_outage_leaves_the_segment_pending() {
    let (endpoint, mock) = start_mock();
    let engine = Arc::new(remote_config(&endpoint, GeneratorKind::Remote).build_engine().unwrap());
    let mut s = Session::new("outage", SessionConfig::default(), engine).unwrap();
    mock.fail_generate.store(true, Ordering::SeqCst);
    let now = drag_and_stop(&mut s);
    let out = s.run_pending_job(now);
    assert!(out.iter().any(|m| matches!(&m.event, ServerEvent::Error { message } if message.contains("503"))), "{out:?}");
    assert!(s.segments()[0].text.is_empty());
    assert!(s.pending_job().is_none());
    s.check_invariants().unwrap();

    // Once the endpoint recovers an explicit request fills the segment.
    mock.fail_generate.store(false, Ordering::SeqCst);
    s.handle(msg(ClientEvent::GenerateText { user_prompt: None, swap_active: false, segment: None }), now + 100);
    let out = s.run_pending_job(now + 200);
    assert!(out.iter().any(|m| matches!(m.event, ServerEvent::TextReady { .. })), "{out:?}");
    assert_eq!(s.segments()[0].text, "Tom tickles Mia.");
}

#[test]
fn misconfigured_remote_embeddings_are_rejected_at_startup() {
    let (endpoint, mock) = start_mock();
    mock.wrong_width.store(true, Ordering::SeqCst);
    let err = remote_config(&endpoint, GeneratorKind::Template).build_engine().unwrap_err();
    assert!(format!("{err:#}").contains("width mismatch"), "{err:#}");
    assert_eq!(*mock.embed_calls.lock().unwrap(), 1);

    let err = remote_config("http://127.0.0.1:9", GeneratorKind::Template).build_engine().unwrap_err();
    assert!(format!("{err:#}").contains("provider"), "{err:#}");
}
