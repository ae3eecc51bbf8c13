//! Shared inference resources and the execution of text jobs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::events::{JobId, SegmentId};
use crate::action::{ActionInfo, EmbeddingProvider, Lexicon, PseudoEmbeddings, SOFT_PROMPT_K};
use crate::error::{Error, Result};
use crate::motion::Character;
use crate::neural::{ModelConfig, ModelKind, Preset, SequenceModel};
use crate::pipelines::{
    build_soft_prompt, build_story_prompt, generate_sentence, text2action, text2char, PseudoTokenEmbeddings, StoryContext,
    StorySettings, TemplateGenerator, TextGenerator, TokenEmbeddingProvider,
};

/// The four trained models a session steps every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub motion2action: SequenceModel,
    pub motion2char: SequenceModel,
    pub proactive: SequenceModel,
    pub reactive: SequenceModel,
}

impl Models {
    /// Freshly initialized (untrained) models; used for latency checks and
    /// offline demos.
    pub fn initialized(preset: Preset, embedding_dim: usize, seed: u64) -> Self {
        let make = |kind: ModelKind, offset: u64| {
            SequenceModel::new(ModelConfig::preset(kind, preset, embedding_dim), seed.wrapping_add(offset))
        };
        Models {
            motion2action: make(ModelKind::Motion2Action, 0),
            motion2char: make(ModelKind::Motion2Char, 1),
            proactive: make(ModelKind::Proactive, 2),
            reactive: make(ModelKind::Reactive, 3),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &SequenceModel> {
        [&self.motion2action, &self.motion2char, &self.proactive, &self.reactive].into_iter()
    }

    pub fn validate(&self, embedding_dim: usize) -> Result<()> {
        for (model, kind) in self.iter().zip(ModelKind::ALL) {
            model.expect_kind(kind)?;
            if model.config.embedding_dim != embedding_dim {
                return Err(Error::WidthMismatch { expected: embedding_dim, actual: model.config.embedding_dim });
            }
        }
        Ok(())
    }
}

pub struct Engine {
    pub models: Models,
    pub lexicon: Lexicon,
    pub embeddings: Arc<dyn EmbeddingProvider>,
    pub tokens: Arc<dyn TokenEmbeddingProvider>,
    pub generator: Arc<dyn TextGenerator>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("lexicon_terms", &self.lexicon.len()).finish_non_exhaustive()
    }
}

impl Engine {
    pub fn new(
        models: Models,
        embeddings: Arc<dyn EmbeddingProvider>,
        tokens: Arc<dyn TokenEmbeddingProvider>,
        generator: Arc<dyn TextGenerator>,
    ) -> Result<Self> {
        let lexicon = Lexicon::base(embeddings.as_ref())?;
        models.validate(lexicon.dimension())?;
        Ok(Engine { models, lexicon, embeddings, tokens, generator })
    }

    /// Untrained desk models with pseudo providers and the template
    /// generator. Fully deterministic for a given seed.
    pub fn offline(embedding_dim: usize, seed: u64) -> Self {
        Engine::offline_with(Models::initialized(Preset::Desk, embedding_dim, seed), Arc::new(TemplateGenerator), seed)
            .expect("offline engine is consistent")
    }

    pub fn offline_with(models: Models, generator: Arc<dyn TextGenerator>, seed: u64) -> Result<Self> {
        let dim = models.motion2action.config.embedding_dim;
        Engine::new(
            models,
            Arc::new(PseudoEmbeddings::new(dim, seed)),
            Arc::new(PseudoTokenEmbeddings::new(OFFLINE_TOKEN_DIM, seed)),
            generator,
        )
    }

    /// Runs a job to completion. Never panics on provider failures; they
    /// become `JobOutcome::Failed`.
    pub fn run(&self, spec: &JobSpec) -> JobCompletion {
        let outcome = match self.run_task(&spec.task) {
            Ok(result) => JobOutcome::Done(result),
            Err(e) => JobOutcome::Failed { message: e.to_string(), retryable: e.is_retryable() },
        };
        JobCompletion { job: spec.id, outcome }
    }

    fn narrate(&self, settings: &StorySettings, ctx: StoryContext<'_>, action: &ActionInfo) -> Result<String> {
        let block = build_soft_prompt(&action.embedding, &self.lexicon, self.tokens.as_ref(), SOFT_PROMPT_K)?;
        let prompt = build_story_prompt(settings, ctx, &block, action.active);
        generate_sentence(self.generator.as_ref(), &prompt)
    }

    fn interpret(&self, settings: &StorySettings, sentence: &str, fallback: Character) -> Result<(ActionInfo, Option<String>)> {
        let embedding = text2action(sentence, self.embeddings.as_ref(), &self.lexicon)?;
        match text2char(sentence, &embedding, settings, &self.lexicon, self.tokens.as_ref(), self.generator.as_ref()) {
            Ok(active) => Ok((ActionInfo { embedding, active }, None)),
            Err(Error::CharacterParse { raw }) => Ok((
                ActionInfo { embedding, active: fallback },
                Some(format!("could not tell the active character from reply {raw:?}; keeping character {}", fallback.index())),
            )),
            Err(e) => Err(e),
        }
    }

    fn run_task(&self, task: &JobTask) -> Result<JobResult> {
        match task {
            JobTask::Narrate { settings, history, following, action, user_prompt } => {
                let ctx = StoryContext { history, following, user_prompt: user_prompt.as_deref() };
                Ok(JobResult::Narrated { text: self.narrate(settings, ctx, action)? })
            }
            JobTask::Interpret { settings, sentence, fallback } => {
                let (info, warning) = self.interpret(settings, sentence, *fallback)?;
                Ok(JobResult::Interpreted { info, warning })
            }
            JobTask::Compose { settings, history, following, action, user_prompt, fallback } => {
                let action = match (user_prompt.as_deref().map(str::trim).filter(|p| !p.is_empty()), action) {
                    (Some(p), _) => ActionInfo { embedding: text2action(p, self.embeddings.as_ref(), &self.lexicon)?, active: *fallback },
                    (None, Some(a)) => a.clone(),
                    (None, None) => return Err(Error::Session("nothing to compose from: no prompt and no recognized action".into())),
                };
                let ctx = StoryContext { history, following, user_prompt: user_prompt.as_deref() };
                let text = self.narrate(settings, ctx, &action)?;
                let (info, warning) = self.interpret(settings, &text, action.active)?;
                Ok(JobResult::Composed { text, info, warning })
            }
        }
    }
}

/// Token-embedding width of the offline engine.
pub const OFFLINE_TOKEN_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub id: JobId,
    pub segment: SegmentId,
    pub task: JobTask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JobTask {
    /// Sentence for recorded motion.
    Narrate {
        settings: StorySettings,
        history: Vec<String>,
        following: Vec<String>,
        action: ActionInfo,
        user_prompt: Option<String>,
    },
    /// Action info for a sentence the user wrote.
    Interpret { settings: StorySettings, sentence: String, fallback: Character },
    /// Sentence before any motion exists, then its action info.
    Compose {
        settings: StorySettings,
        history: Vec<String>,
        following: Vec<String>,
        action: Option<ActionInfo>,
        user_prompt: Option<String>,
        fallback: Character,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JobResult {
    Narrated { text: String },
    Interpreted { info: ActionInfo, warning: Option<String> },
    Composed { text: String, info: ActionInfo, warning: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobOutcome {
    Done(JobResult),
    Failed { message: String, retryable: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobCompletion {
    pub job: JobId,
    pub outcome: JobOutcome,
}
