use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use storyplay_core::action::{topk_weights, Lexicon, PseudoEmbeddings, EMBEDDING_FILE_DIMENSION_DEFAULT, SOFT_PROMPT_K};
use storyplay_core::eval::{gini, mst_dispersion};
use storyplay_core::neural::{HeadConditioning, ModelConfig, ModelKind, Preset, SequenceModel};
use storyplay_core::pipelines::{build_soft_prompt, PseudoTokenEmbeddings};
use storyplay_core::session::{ClientEvent, ClientMessage, Engine, Session, SessionConfig, OFFLINE_TOKEN_DIM};

const DIM: usize = EMBEDDING_FILE_DIMENSION_DEFAULT;

fn lstm_step(c: &mut Criterion) {
    let model = SequenceModel::new(ModelConfig::preset(ModelKind::Motion2Action, Preset::Desk, DIM), 0);
    let state = model.fresh_state();
    let features = [0.1, -0.2, 0.05, 0.3, 0.0, -0.1];
    c.bench_function("motion2action step (desk)", |b| {
        b.iter(|| model.step(black_box(&features), &state, HeadConditioning::default()).unwrap())
    });
}

/// A session with a sentence-conditioned segment long enough to generate
/// every benchmark iteration.
fn generating_session() -> Session {
    let engine = Arc::new(Engine::offline(DIM, 0));
    let config = SessionConfig { text_first_frames: 1_000_000, ..SessionConfig::default() };
    let mut s = Session::new("bench", config, engine).unwrap();
    let send = |s: &mut Session, event| s.handle(ClientMessage { seq: None, session: None, event }, 0);
    send(&mut s, ClientEvent::SetAuto { auto: false });
    send(&mut s, ClientEvent::WriteText { segment: None, text: "Mia chases Tom.".into() });
    s.run_pending_job(0);
    send(&mut s, ClientEvent::GenerateMotionBoth);
    for t in 0..10 {
        s.tick(t * 100);
    }
    s
}

fn session_tick(c: &mut Criterion) {
    let mut now = 10_000;
    c.bench_function("session tick, both generated (desk)", |b| {
        b.iter_batched_ref(
            generating_session,
            |s| {
                now += 100;
                black_box(s.tick(now))
            },
            BatchSize::LargeInput,
        )
    });
}

fn soft_prompt(c: &mut Criterion) {
    let embeddings = PseudoEmbeddings::new(DIM, 0);
    let lexicon = Lexicon::base(&embeddings).unwrap();
    let tokens = PseudoTokenEmbeddings::new(OFFLINE_TOKEN_DIM, 0);
    let query = lexicon.embedding("chase").unwrap().clone();
    c.bench_function("top-k weights over the lexicon", |b| {
        b.iter(|| topk_weights(black_box(&query), &lexicon, SOFT_PROMPT_K).unwrap())
    });
    c.bench_function("soft prompt block", |b| {
        b.iter(|| build_soft_prompt(black_box(&query), &lexicon, &tokens, SOFT_PROMPT_K).unwrap())
    });
}

fn metrics(c: &mut Criterion) {
    let weights: Vec<f64> = (0..31).map(|i| ((i * 7919) % 31) as f64 + 0.5).collect();
    c.bench_function("gini over 31 weights", |b| b.iter(|| gini(black_box(&weights)).unwrap()));
    let vectors: Vec<Vec<f64>> =
        (0..100).map(|i| (0..DIM).map(|j| (((i * 31 + j * 17) % 97) as f64 - 48.0) / 48.0 + 0.01).collect()).collect();
    c.bench_function("mst dispersion, 100 points", |b| b.iter(|| mst_dispersion(black_box(&vectors)).unwrap()));
}

criterion_group!(benches, lstm_step, session_tick, soft_prompt, metrics);
criterion_main!(benches);
