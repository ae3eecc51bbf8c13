//! Service configuration (TOML or JSON) and engine assembly.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use storyplay_core::action::{EmbeddingProvider, PseudoEmbeddings, RemoteEmbeddings, TableEmbeddings, EMBEDDING_FILE_DIMENSION_DEFAULT};
use storyplay_core::neural::{Checkpoint, ModelKind, Preset};
use storyplay_core::pipelines::{
    CachedTokenEmbeddings, EchoGenerator, PseudoTokenEmbeddings, RemoteGenerator, RemoteTokenEmbeddings, TemplateGenerator,
    TextGenerator, TextOnly, TokenEmbeddingProvider,
};
use storyplay_core::session::{Engine, Models, SessionConfig, OFFLINE_TOKEN_DIM};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub session: SessionConfig,
    pub models: ModelsConfig,
    pub providers: ProvidersConfig,
    pub server: ServerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    /// Size of freshly initialized models when no checkpoints are given.
    pub preset: Preset,
    pub seed: u64,
    /// Directory holding `motion2action.json`, `motion2char.json`,
    /// `proactive.json` and `reactive.json`.
    pub checkpoints: Option<PathBuf>,
    pub motion2action: Option<PathBuf>,
    pub motion2char: Option<PathBuf>,
    pub proactive: Option<PathBuf>,
    pub reactive: Option<PathBuf>,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        ModelsConfig {
            preset: Preset::Desk,
            seed: 0,
            checkpoints: None,
            motion2action: None,
            motion2char: None,
            proactive: None,
            reactive: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingsKind {
    Pseudo,
    Table,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokensKind {
    Pseudo,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Template,
    Echo,
    Remote,
    /// Remote generator that only accepts plain text; vector blocks are
    /// replaced by their top term.
    RemoteTextOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersConfig {
    pub embeddings: EmbeddingsKind,
    pub embedding_dim: usize,
    /// Table file for `embeddings = "table"`.
    pub embeddings_path: Option<PathBuf>,
    pub tokens: TokensKind,
    pub token_dim: usize,
    pub generator: GeneratorKind,
    /// Base URL shared by the remote providers.
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    /// Seed of the pseudo providers.
    pub seed: u64,
}

impl Default for ProvidersConfig {
    fn default() -> Self {
        ProvidersConfig {
            embeddings: EmbeddingsKind::Pseudo,
            embedding_dim: EMBEDDING_FILE_DIMENSION_DEFAULT,
            embeddings_path: None,
            tokens: TokensKind::Pseudo,
            token_dim: OFFLINE_TOKEN_DIM,
            generator: GeneratorKind::Template,
            endpoint: None,
            timeout_ms: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    /// Session logs are appended to `<log_dir>/<session>.jsonl`.
    pub log_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { bind: SocketAddr::from(([127, 0, 0, 1], 8080)), log_dir: None }
    }
}

impl ServiceConfig {
    /// Reads `.json` files as JSON and everything else as TOML.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: ServiceConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        config.session.validate()?;
        Ok(config)
    }

    fn endpoint(&self) -> anyhow::Result<&str> {
        self.providers.endpoint.as_deref().context("a remote provider is configured but `providers.endpoint` is not set")
    }

    fn checkpoint_path(&self, kind: ModelKind) -> Option<PathBuf> {
        let m = &self.models;
        let explicit = match kind {
            ModelKind::Motion2Action => &m.motion2action,
            ModelKind::Motion2Char => &m.motion2char,
            ModelKind::Proactive => &m.proactive,
            ModelKind::Reactive => &m.reactive,
        };
        explicit.clone().or_else(|| m.checkpoints.as_ref().map(|d| d.join(format!("{kind}.json"))))
    }

    pub fn build_embeddings(&self) -> anyhow::Result<Arc<dyn EmbeddingProvider>> {
        let p = &self.providers;
        let timeout = Duration::from_millis(p.timeout_ms);
        Ok(match p.embeddings {
            EmbeddingsKind::Pseudo => Arc::new(PseudoEmbeddings::new(p.embedding_dim, p.seed)),
            EmbeddingsKind::Table => {
                let path = p.embeddings_path.as_ref().context("`embeddings = \"table\"` needs `embeddings_path`")?;
                Arc::new(TableEmbeddings::load(path).with_context(|| format!("loading {}", path.display()))?)
            }
            EmbeddingsKind::Remote => Arc::new(RemoteEmbeddings::new(self.endpoint()?, p.embedding_dim, timeout)),
        })
    }

    pub fn build_models(&self, embedding_dim: usize) -> anyhow::Result<Models> {
        let paths: Vec<Option<PathBuf>> = ModelKind::ALL.iter().map(|k| self.checkpoint_path(*k)).collect();
        if paths.iter().all(Option::is_none) {
            if self.models.preset == Preset::Paper {
                bail!("the paper preset is only usable with trained checkpoints");
            }
            return Ok(Models::initialized(self.models.preset, embedding_dim, self.models.seed));
        }
        let mut loaded = Vec::with_capacity(4);
        for (kind, path) in ModelKind::ALL.iter().zip(paths) {
            let path = path.with_context(|| format!("no checkpoint configured for {kind}"))?;
            let ckpt = Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
            ckpt.model.expect_kind(*kind).with_context(|| path.display().to_string())?;
            loaded.push(ckpt.model);
        }
        let mut it = loaded.into_iter();
        let mut next = || it.next().expect("four checkpoints");
        Ok(Models { motion2action: next(), motion2char: next(), proactive: next(), reactive: next() })
    }

    pub fn build_engine(&self) -> anyhow::Result<Engine> {
        let p = &self.providers;
        let timeout = Duration::from_millis(p.timeout_ms);
        let embeddings = self.build_embeddings()?;
        let tokens: Arc<dyn TokenEmbeddingProvider> = match p.tokens {
            TokensKind::Pseudo => Arc::new(PseudoTokenEmbeddings::new(p.token_dim, p.seed)),
            TokensKind::Remote => {
                Arc::new(CachedTokenEmbeddings::new(RemoteTokenEmbeddings::new(self.endpoint()?, p.token_dim, timeout)))
            }
        };
        let generator: Arc<dyn TextGenerator> = match p.generator {
            GeneratorKind::Template => Arc::new(TemplateGenerator),
            GeneratorKind::Echo => Arc::new(EchoGenerator),
            GeneratorKind::Remote => Arc::new(RemoteGenerator::new(self.endpoint()?, timeout)),
            GeneratorKind::RemoteTextOnly => Arc::new(TextOnly(RemoteGenerator::new(self.endpoint()?, timeout))),
        };
        let models = self.build_models(embeddings.dimension())?;
        Ok(Engine::new(models, embeddings, tokens, generator)?)
    }
}
