//! Random client event sequences for exercising the session state machine.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storyplay_core::motion::Character;
use storyplay_core::neural::{ModelConfig, ModelKind, SequenceModel};
use storyplay_core::pipelines::{ScriptedGenerator, TemplateGenerator, TextGenerator};
use storyplay_core::session::{
    ClientEvent, ClientMessage, Engine, JobCompletion, JobOutcome, Models, ServerEvent, ServerMessage, Session,
    SessionConfig,
};

/// Tiny untrained models; the structural behaviour under test does not
/// depend on model size.
pub fn tiny_models(dim: usize, seed: u64) -> Models {
    let make = |kind, s| {
        SequenceModel::new(ModelConfig { kind, input: 6, hidden: 4, layers: 1, head_hidden: 4, embedding_dim: dim }, s)
    };
    Models {
        motion2action: make(ModelKind::Motion2Action, seed),
        motion2char: make(ModelKind::Motion2Char, seed + 1),
        proactive: make(ModelKind::Proactive, seed + 2),
        reactive: make(ModelKind::Reactive, seed + 3),
    }
}

pub fn tiny_engine(seed: u64) -> Arc<Engine> {
    tiny_engine_with(seed, Arc::new(TemplateGenerator))
}

pub fn tiny_engine_with(seed: u64, generator: Arc<dyn TextGenerator>) -> Arc<Engine> {
    Arc::new(Engine::offline_with(tiny_models(8, seed), generator, seed).unwrap())
}

/// An engine whose generator sometimes returns an empty reply (a provider
/// failure) or an unparseable character answer.
pub fn flaky_engine(seed: u64) -> Arc<Engine> {
    let replies = ["Mia hugs Tom.", "", "maybe", "Tom runs.", "1", "Tom pokes Mia.", "0"];
    tiny_engine_with(seed, Arc::new(ScriptedGenerator::new(replies)))
}

fn random_event(rng: &mut ChaCha8Rng, s: &Session) -> ClientEvent {
    let seg = |rng: &mut ChaCha8Rng| {
        let segs = s.segments();
        if segs.is_empty() || rng.random_bool(0.1) {
            rng.random_range(0..5)
        } else {
            segs[rng.random_range(0..segs.len())].id
        }
    };
    let frame = |rng: &mut ChaCha8Rng| rng.random_range(0..=s.frames().len() + 1);
    let character = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { Character::Sym0 } else { Character::Sym1 };
    match rng.random_range(0..100) {
        0..=34 => ClientEvent::PointerFrame {
            character: character(rng),
            x: rng.random_range(-0.2..1.2),
            y: rng.random_range(-0.2..1.2),
            r: rng.random_range(-4.0..4.0),
        },
        35..=44 => ClientEvent::PointerRelease { character: rng.random_bool(0.5).then(|| character(rng)) },
        45..=49 => ClientEvent::SetAuto { auto: rng.random_bool(0.6) },
        50..=56 => ClientEvent::GenerateMotionBoth,
        57..=63 => ClientEvent::GenerateText {
            user_prompt: rng.random_bool(0.5).then(|| ["push", "make it funny", "hug", " "][rng.random_range(0..4)].to_string()),
            swap_active: rng.random_bool(0.2),
            segment: rng.random_bool(0.3).then(|| seg(rng)),
        },
        64..=70 => ClientEvent::WriteText {
            segment: rng.random_bool(0.3).then(|| seg(rng)),
            text: ["Tom chases Mia.", "Mia pushes Tom away.", "", "They rest."][rng.random_range(0..4)].to_string(),
        },
        71..=74 => ClientEvent::EditText { segment: seg(rng), text: "An edited line.".into() },
        75..=80 => ClientEvent::DeleteAfter { frame: frame(rng) },
        81..=85 => ClientEvent::ResizeSegment { segment: seg(rng), new_end: frame(rng) + rng.random_range(0..10) },
        86..=91 => ClientEvent::Seek { frame: frame(rng) },
        92..=95 => ClientEvent::Play,
        _ => ClientEvent::Stop,
    }
}

/// Outcome of one fuzzed run.
pub struct FuzzRun {
    pub session: Session,
    pub steps: usize,
}

/// Drives a session with `len` random inputs (client events, ticks and job
/// completions), checking the structural invariants after every input.
pub fn fuzz_session(engine: Arc<Engine>, seed: u64, len: usize) -> Result<FuzzRun, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = SessionConfig { text_first_frames: rng.random_range(1..8), ..SessionConfig::default() };
    let mut s = Session::new(format!("fuzz-{seed}"), config, engine).map_err(|e| e.to_string())?;
    let mut now = 0u64;
    let mut held: Option<JobCompletion> = None;
    for step in 0..len {
        now += rng.random_range(0..400);
        let before = s.pending_job().map(|j| j.id);
        let choice = rng.random_range(0..100);
        let (out, completing): (Vec<ServerMessage>, Option<u64>) = match choice {
            0..=39 => {
                let event = random_event(&mut rng, &s);
                let seq = rng.random_bool(0.9).then_some(step as u64 + 1);
                (s.handle(ClientMessage { seq, session: None, event }, now), None)
            }
            40..=79 => (s.tick(now), None),
            80..=89 => match s.take_job() {
                Some(spec) => {
                    let done = s.engine().run(&spec);
                    if rng.random_bool(0.5) {
                        held = Some(done);
                        (Vec::new(), None)
                    } else {
                        (s.complete_job(done, now), Some(spec.id))
                    }
                }
                None => (Vec::new(), None),
            },
            90..=94 => match held.take() {
                Some(done) => {
                    let id = done.job;
                    (s.complete_job(done, now), Some(id))
                }
                None => (Vec::new(), None),
            },
            _ => {
                let job = rng.random_range(0..5);
                let done = JobCompletion { job, outcome: JobOutcome::Failed { message: "injected".into(), retryable: true } };
                (s.complete_job(done, now), Some(job))
            }
        };
        s.check_invariants().map_err(|e| format!("seed {seed} step {step}: {e}"))?;
        let started = out.iter().filter(|m| matches!(m.event, ServerEvent::GenerationStarted { .. })).count();
        let cancelled = out.iter().any(|m| matches!(&m.event, ServerEvent::Warning { message } if message.contains("cancelled")));
        if started > 1 {
            return Err(format!("seed {seed} step {step}: {started} jobs started at once"));
        }
        if started == 1 {
            if let Some(prev) = before {
                if completing != Some(prev) && !cancelled {
                    return Err(format!("seed {seed} step {step}: job started while job {prev} was outstanding"));
                }
            }
        }
        for w in out.windows(2) {
            if w[1].seq != w[0].seq + 1 {
                return Err(format!("seed {seed} step {step}: server sequence gap"));
            }
        }
    }
    Ok(FuzzRun { session: s, steps: len })
}
