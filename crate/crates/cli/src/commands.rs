//! Offline commands: corpus synthesis, training, evaluation and log replay.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use storyplay_core::action::{EmbeddingFile, EmbeddingProvider, Lexicon};
use storyplay_core::dataset::synthetic::synthetic_instances;
use storyplay_core::dataset::{load_charades, save_corpus, split, subsample, DatasetSplit, MotionInstance, SceneScale};
use storyplay_core::eval::{eval_recognition, latency_bench, mst_dispersion, DiversityReport, LatencyReport, RecognitionReport};
use storyplay_core::motion::RUNTIME_FPS;
use storyplay_core::neural::{train, Checkpoint, ModelConfig, ModelKind, Preset, TrainConfig};
use storyplay_core::session::{read_jsonl, replay, Engine, Models, ReplayMode, StoryExport};

use crate::config::ServiceConfig;

/// Loads a corpus and brings every instance to `fps`.
pub fn load_corpus(path: &Path, scale: SceneScale, fps: u32) -> anyhow::Result<Vec<MotionInstance>> {
    let raw = load_charades(path, scale).with_context(|| format!("loading corpus {}", path.display()))?;
    raw.iter()
        .map(|inst| if inst.trajectory.fps == fps { Ok(inst.clone()) } else { Ok(subsample(inst, fps)?) })
        .collect()
}

/// `test_size` of `None` holds out a fifth of the corpus.
pub fn split_corpus(instances: &[MotionInstance], seed: u64, test_size: Option<usize>) -> anyhow::Result<DatasetSplit> {
    let n_test = test_size.unwrap_or(instances.len() / 5);
    if n_test > instances.len() {
        bail!("test size {n_test} exceeds the corpus size {}", instances.len());
    }
    Ok(split(instances, seed, instances.len() - n_test, n_test)?)
}

pub fn synth(out: &Path, count: usize, frames: usize, fps: u32, seed: u64) -> anyhow::Result<()> {
    if frames == 0 || fps == 0 {
        bail!("frames and fps must be positive");
    }
    save_corpus(out, &synthetic_instances(count, frames, fps, seed), SceneScale::default())?;
    Ok(())
}

pub struct TrainArgs {
    pub kind: ModelKind,
    pub corpus: PathBuf,
    pub preset: Preset,
    pub seed: u64,
    pub out: PathBuf,
    pub epochs: Option<usize>,
    pub test_size: Option<usize>,
    pub scale: SceneScale,
    pub fps: u32,
}

pub fn run_train(args: &TrainArgs, embeddings: &dyn EmbeddingProvider) -> anyhow::Result<Checkpoint> {
    let instances = load_corpus(&args.corpus, args.scale, args.fps)?;
    let data = split_corpus(&instances, args.seed, args.test_size)?;
    let lexicon = Lexicon::base(embeddings)?;
    let mut cfg = TrainConfig::preset(args.kind, args.preset);
    cfg.seed = args.seed;
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    tracing::info!(
        model = %args.kind,
        train = data.train.len(),
        test = data.test.len(),
        epochs = cfg.epochs,
        "training"
    );
    let outcome = train(ModelConfig::preset(args.kind, args.preset, lexicon.dimension()), &data, &lexicon, &cfg, |s| {
        tracing::info!(epoch = s.epoch, train_loss = s.train_loss, test_loss = ?s.test_loss, "epoch");
    })?;
    outcome.checkpoint.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(outcome.checkpoint)
}

pub fn load_checkpoint(dir: &Path, kind: ModelKind) -> anyhow::Result<Checkpoint> {
    let path = dir.join(format!("{kind}.json"));
    let ckpt = Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
    ckpt.model.expect_kind(kind)?;
    Ok(ckpt)
}

pub fn run_eval_recognition(
    corpus: &Path,
    checkpoints: &Path,
    embeddings: &dyn EmbeddingProvider,
    scale: SceneScale,
    fps: u32,
    held_out: Option<(u64, Option<usize>)>,
) -> anyhow::Result<RecognitionReport> {
    let instances = load_corpus(corpus, scale, fps)?;
    let test = match held_out {
        Some((seed, size)) => split_corpus(&instances, seed, size)?.test,
        None => instances,
    };
    let lexicon = Lexicon::base(embeddings)?;
    let m2a = load_checkpoint(checkpoints, ModelKind::Motion2Action)?;
    let m2c = load_checkpoint(checkpoints, ModelKind::Motion2Char)?;
    Ok(eval_recognition(&m2a.model, &m2c.model, &test, &lexicon)?)
}

/// Accepted forms: a bare array of vectors, `{"vectors": [...]}`, or an
/// embedding table `{"dimension": D, "entries": {text: vector}}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum VectorsFile {
    Bare(Vec<Vec<f64>>),
    Wrapped { vectors: Vec<Vec<f64>> },
    Table(EmbeddingFile),
}

pub fn read_vectors(path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let file: VectorsFile = serde_json::from_reader(BufReader::new(File::open(path)?))
        .with_context(|| format!("reading vectors from {}", path.display()))?;
    Ok(match file {
        VectorsFile::Bare(v) | VectorsFile::Wrapped { vectors: v } => v,
        VectorsFile::Table(t) => {
            if let Some((k, v)) = t.entries.iter().find(|(_, v)| v.len() != t.dimension) {
                bail!("entry {k:?} has {} values, expected {}", v.len(), t.dimension);
            }
            t.entries.into_values().collect()
        }
    })
}

/// Embeds one sentence per non-empty line.
pub fn embed_sentences(path: &Path, embeddings: &dyn EmbeddingProvider) -> anyhow::Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    Ok(embeddings.embed_batch(&lines)?.into_iter().map(|e| e.0).collect())
}

pub fn run_eval_diversity(vectors: &[Vec<f64>]) -> anyhow::Result<DiversityReport> {
    Ok(mst_dispersion(vectors)?)
}

pub fn write_diversity_csv(report: &DiversityReport, out: impl Write) -> anyhow::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "a,b,weight")?;
    for e in &report.edges {
        writeln!(w, "{},{},{}", e.a, e.b, e.weight)?;
    }
    w.flush()?;
    Ok(())
}

/// Latency of the live tick with freshly initialized models, or with the
/// engine a service config describes.
pub fn run_eval_latency(
    preset: Preset,
    config: Option<&ServiceConfig>,
    embedding_dim: usize,
    frames: usize,
    warmup: usize,
) -> anyhow::Result<LatencyReport> {
    let engine = match config {
        Some(c) => c.build_engine()?,
        None => {
            if preset == Preset::Paper {
                bail!("paper-sized models need trained checkpoints; pass --config");
            }
            let models = Models::initialized(preset, embedding_dim, 0);
            Engine::offline_with(models, Arc::new(storyplay_core::pipelines::TemplateGenerator), 0)?
        }
    };
    Ok(latency_bench(Arc::new(engine), frames, warmup)?)
}

/// Budget for one live frame.
pub const FRAME_BUDGET_MS: f64 = 100.0;

#[derive(Debug, Serialize)]
pub struct LatencySummary<'a> {
    pub preset: Preset,
    pub budget_ms: f64,
    pub within_budget: bool,
    #[serde(flatten)]
    pub report: &'a LatencyReport,
}

pub fn run_replay(log: &Path, config: &ServiceConfig, recompute: bool) -> anyhow::Result<StoryExport> {
    let entries = read_jsonl(BufReader::new(File::open(log).with_context(|| format!("opening {}", log.display()))?))?;
    let engine = Arc::new(config.build_engine()?);
    let mode = if recompute { ReplayMode::Recompute } else { ReplayMode::UseRecorded };
    let session = replay(&entries, engine, mode)?;
    session.check_invariants().map_err(anyhow::Error::msg)?;
    Ok(session.export())
}

/// Writes `value` as pretty JSON to `path`, or to stdout for `-`.
pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    if path == Path::new("-") {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        serde_json::to_writer_pretty(&mut lock, value)?;
        writeln!(lock)?;
    } else {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(())
}

/// `report.json` → `report.csv`.
pub fn csv_sibling(path: &Path) -> PathBuf {
    path.with_extension("csv")
}

pub const DEFAULT_FPS: u32 = RUNTIME_FPS;
