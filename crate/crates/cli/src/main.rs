use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use storyplay_cli::commands::{self, csv_sibling, write_json, LatencySummary, TrainArgs, DEFAULT_FPS, FRAME_BUDGET_MS};
use storyplay_cli::config::ServiceConfig;
use storyplay_cli::server::{self, AppState};
use storyplay_core::dataset::SceneScale;
use storyplay_core::neural::{ModelKind, Preset};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "storyplay", version, about = "Two-character motion storytelling: training, evaluation and the live server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus in the corpus JSON format.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 62)]
        count: usize,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = DEFAULT_FPS)]
        fps: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one model and write its checkpoint.
    Train {
        #[arg(long, value_parser = parse_kind)]
        model: ModelKind,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_parser = parse_preset, default_value = "desk")]
        preset: Preset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override the preset's epoch count.
        #[arg(long)]
        epochs: Option<usize>,
        /// Held-out instances used for checkpoint selection (default: a fifth).
        #[arg(long)]
        test_size: Option<usize>,
        #[command(flatten)]
        data: DataArgs,
    },
    #[command(subcommand)]
    Eval(Eval),
    /// Run the HTTP and WebSocket session server.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `server.bind`.
        #[arg(long)]
        bind: Option<std::net::SocketAddr>,
    },
    /// Rebuild a story from a session log and print its export.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Re-run text jobs instead of reusing their recorded results.
        #[arg(long)]
        recompute: bool,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Eval {
    /// Gold-action rank, weight ratio, Gini and character accuracy.
    Recognition {
        #[arg(long)]
        corpus: PathBuf,
        /// Directory with motion2action.json and motion2char.json.
        #[arg(long)]
        checkpoints: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-instance rows; defaults to the report path with a .csv extension.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Evaluate only the held-out part of the seeded split used by `train`.
        #[arg(long)]
        held_out: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        test_size: Option<usize>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Minimum-spanning-tree dispersion over sentence embeddings.
    Diversity {
        /// JSON vectors: a bare array, {"vectors": [...]}, or an embedding table.
        #[arg(long, conflicts_with = "sentences", required_unless_present = "sentences")]
        embeddings: Option<PathBuf>,
        /// One sentence per line, embedded with the configured provider.
        #[arg(long)]
        sentences: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "-")]
        out: PathBuf,
        /// MST edge list.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Per-frame cost of the live tick with both characters generated.
    Latency {
        #[arg(long, value_parser = parse_preset, default_value = "desk")]
        preset: Preset,
        /// Use the engine described by a service config instead of fresh models.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 384)]
        embedding_dim: usize,
        #[arg(long, default_value_t = 200)]
        frames: usize,
        #[arg(long, default_value_t = 10)]
        warmup: usize,
        #[arg(long, default_value = "-")]
        out: PathBuf,
        /// Per-frame samples.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Service config whose `[providers]` section supplies the embeddings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Frame rate the corpus is subsampled to.
    #[arg(long, default_value_t = DEFAULT_FPS)]
    fps: u32,
    /// Raw scene width; coordinates are divided by it.
    #[arg(long, default_value_t = 1.0)]
    scene_width: f64,
    #[arg(long, default_value_t = 1.0)]
    scene_height: f64,
}

impl DataArgs {
    fn scale(&self) -> anyhow::Result<SceneScale> {
        if !(self.scene_width > 0.0 && self.scene_height > 0.0) {
            bail!("scene width and height must be positive");
        }
        Ok(SceneScale { width: self.scene_width, height: self.scene_height })
    }
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: storyplay_core::Error| e.to_string())
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: storyplay_core::Error| e.to_string())
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ServiceConfig> {
    match path {
        Some(p) => ServiceConfig::load(p),
        None => Ok(ServiceConfig::default()),
    }
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Synth { out, count, frames, fps, seed } => commands::synth(&out, count, frames, fps, seed),
        Command::Train { model, corpus, preset, seed, out, epochs, test_size, data } => {
            let config = load_config(data.config.as_deref())?;
            let embeddings = config.build_embeddings()?;
            let args = TrainArgs { kind: model, corpus, preset, seed, out, epochs, test_size, scale: data.scale()?, fps: data.fps };
            let ckpt = commands::run_train(&args, embeddings.as_ref())?;
            tracing::info!(epoch = ckpt.meta.epoch, train_loss = ckpt.meta.train_loss, test_loss = ?ckpt.meta.test_loss, "kept checkpoint");
            Ok(())
        }
        Command::Eval(Eval::Recognition { corpus, checkpoints, out, csv, held_out, seed, test_size, data }) => {
            let config = load_config(data.config.as_deref())?;
            let embeddings = config.build_embeddings()?;
            let split = held_out.then_some((seed, test_size));
            let report =
                commands::run_eval_recognition(&corpus, &checkpoints, embeddings.as_ref(), data.scale()?, data.fps, split)?;
            write_json(&out, &report)?;
            let csv = csv.unwrap_or_else(|| csv_sibling(&out));
            report.write_csv(std::fs::File::create(&csv).with_context(|| format!("creating {}", csv.display()))?)?;
            tracing::info!(
                instances = report.instances.len(),
                gold_rank = report.gold_rank.mean,
                weight_ratio = report.weight_ratio.mean,
                gini = report.gini.mean,
                char_accuracy = report.char_accuracy.mean,
                "recognition"
            );
            Ok(())
        }
        Command::Eval(Eval::Diversity { embeddings, sentences, config, out, csv }) => {
            let vectors = match (embeddings, sentences) {
                (Some(path), _) => commands::read_vectors(&path)?,
                (None, Some(path)) => {
                    let provider = load_config(config.as_deref())?.build_embeddings()?;
                    commands::embed_sentences(&path, provider.as_ref())?
                }
                (None, None) => bail!("pass --embeddings or --sentences"),
            };
            let report = commands::run_eval_diversity(&vectors)?;
            write_json(&out, &report)?;
            if let Some(csv) = csv {
                commands::write_diversity_csv(&report, std::fs::File::create(&csv)?)?;
            }
            Ok(())
        }
        Command::Eval(Eval::Latency { preset, config, embedding_dim, frames, warmup, out, csv }) => {
            let config = config.as_deref().map(ServiceConfig::load).transpose()?;
            let report = commands::run_eval_latency(preset, config.as_ref(), embedding_dim, frames, warmup)?;
            let within_budget = report.stats.p95_ms < FRAME_BUDGET_MS;
            write_json(&out, &LatencySummary { preset, budget_ms: FRAME_BUDGET_MS, within_budget, report: &report })?;
            if let Some(csv) = csv {
                report.write_csv(std::fs::File::create(&csv)?)?;
            }
            if !within_budget {
                bail!("p95 frame cost {:.2} ms exceeds the {FRAME_BUDGET_MS} ms budget", report.stats.p95_ms);
            }
            Ok(())
        }
        Command::Serve { config, bind } => {
            let mut config = load_config(config.as_deref())?;
            if let Some(b) = bind {
                config.server.bind = b;
            }
            let engine = Arc::new(config.build_engine()?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let state = AppState::new(engine, config.session.clone(), config.server.log_dir.clone())?;
                let listener = tokio::net::TcpListener::bind(config.server.bind)
                    .await
                    .with_context(|| format!("binding {}", config.server.bind))?;
                tracing::info!("listening on {}", listener.local_addr()?);
                server::serve(state, listener).await?;
                Ok(())
            })
        }
        Command::Replay { log, config, recompute, out } => {
            let config = load_config(config.as_deref())?;
            let export = commands::run_replay(&log, &config, recompute)?;
            write_json(&out, &export)
        }
    }
}
