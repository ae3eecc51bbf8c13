//! Token embeddings, text generators, and the text-facing translation paths.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompt::{
    build_character_prompt, parse_character_reply, PromptPurpose, PromptSegment, SoftBlock, SoftPrompt, StorySettings,
    SOFT_PROMPT_ROWS,
};
use crate::action::provider::{hashed_gaussian, words};
use crate::action::{interpolate_terms, topk_weights, ActionEmbedding, EmbeddingProvider, Lexicon, SOFT_PROMPT_K, TEXT_ACTION_K};
use crate::error::{Error, Result};
use crate::motion::Character;
use crate::remote::JsonClient;

/// Sampling temperature for story sentences.
pub const STORY_TEMPERATURE: f64 = 0.7;
/// Sampling temperature for the active-character question.
pub const CHARACTER_TEMPERATURE: f64 = 0.0;

/// Maps a term to the generator's input embeddings of its tokens.
pub trait TokenEmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    /// Exactly `pad_to` rows; short terms are padded with the space token.
    fn token_embeddings(&self, term: &str, pad_to: usize) -> Result<Vec<Vec<f64>>>;
}

/// One seeded Gaussian row per word; padding uses a fixed space-token row.
#[derive(Debug, Clone)]
pub struct PseudoTokenEmbeddings {
    dimension: usize,
    seed: u64,
}

impl PseudoTokenEmbeddings {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "token dimension must be positive");
        PseudoTokenEmbeddings { dimension, seed }
    }
}

impl TokenEmbeddingProvider for PseudoTokenEmbeddings {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn token_embeddings(&self, term: &str, pad_to: usize) -> Result<Vec<Vec<f64>>> {
        let tokens = words(term);
        if tokens.len() > pad_to {
            return Err(Error::InvalidArgument(format!("`{term}` has {} tokens, more than {pad_to}", tokens.len())));
        }
        let mut rows: Vec<Vec<f64>> = tokens.iter().map(|t| hashed_gaussian(self.seed, &format!("token:{t}"), self.dimension)).collect();
        let space = hashed_gaussian(self.seed, "token: ", self.dimension);
        rows.resize(pad_to, space);
        Ok(rows)
    }
}

#[derive(Serialize)]
struct TokenRequest<'a> {
    term: &'a str,
    pad_to: usize,
}

#[derive(Deserialize)]
struct TokenResponse {
    dimension: usize,
    rows: Vec<Vec<f64>>,
}

/// Client for `POST /token_embeddings {"term","pad_to"} → {"dimension","rows"}`.
#[derive(Debug, Clone)]
pub struct RemoteTokenEmbeddings {
    client: JsonClient,
    dimension: usize,
}

impl RemoteTokenEmbeddings {
    pub fn new(base_url: impl Into<String>, dimension: usize, timeout: Duration) -> Self {
        RemoteTokenEmbeddings { client: JsonClient::new(base_url, timeout), dimension }
    }
}

impl TokenEmbeddingProvider for RemoteTokenEmbeddings {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn token_embeddings(&self, term: &str, pad_to: usize) -> Result<Vec<Vec<f64>>> {
        let resp: TokenResponse = self.client.post("/token_embeddings", &TokenRequest { term, pad_to })?;
        if resp.dimension != self.dimension {
            return Err(Error::WidthMismatch { expected: self.dimension, actual: resp.dimension });
        }
        if resp.rows.len() != pad_to {
            return Err(Error::Provider(format!("expected {pad_to} token rows for `{term}`, got {}", resp.rows.len())));
        }
        if let Some(bad) = resp.rows.iter().find(|r| r.len() != self.dimension) {
            return Err(Error::WidthMismatch { expected: self.dimension, actual: bad.len() });
        }
        Ok(resp.rows)
    }
}

/// Rows keyed by `(term, pad_to)`.
type TokenCache = HashMap<(String, usize), Vec<Vec<f64>>>;

/// Memoizes another provider; base terms are looked up on every generation.
pub struct CachedTokenEmbeddings<P> {
    inner: P,
    cache: Mutex<TokenCache>,
}

impl<P: TokenEmbeddingProvider> CachedTokenEmbeddings<P> {
    pub fn new(inner: P) -> Self {
        CachedTokenEmbeddings { inner, cache: Mutex::new(HashMap::new()) }
    }
}

impl<P: TokenEmbeddingProvider> TokenEmbeddingProvider for CachedTokenEmbeddings<P> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn token_embeddings(&self, term: &str, pad_to: usize) -> Result<Vec<Vec<f64>>> {
        let key = (term.to_string(), pad_to);
        if let Some(rows) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(rows.clone());
        }
        let rows = self.inner.token_embeddings(term, pad_to)?;
        self.cache.lock().expect("cache lock").insert(key, rows.clone());
        Ok(rows)
    }
}

/// `Σ wᵢ · token_embeddings(termᵢ)` over the top-k terms of `action`.
pub fn build_soft_prompt(
    action: &ActionEmbedding,
    lexicon: &Lexicon,
    tokens: &dyn TokenEmbeddingProvider,
    k: usize,
) -> Result<SoftBlock> {
    let terms = topk_weights(action, lexicon, k)?;
    let d = tokens.dimension();
    let mut rows = vec![vec![0.0; d]; SOFT_PROMPT_ROWS];
    for t in &terms {
        let e = tokens.token_embeddings(&t.term, SOFT_PROMPT_ROWS)?;
        if e.len() != SOFT_PROMPT_ROWS {
            return Err(Error::Provider(format!("expected {SOFT_PROMPT_ROWS} token rows for `{}`, got {}", t.term, e.len())));
        }
        for (acc, row) in rows.iter_mut().zip(&e) {
            if row.len() != d {
                return Err(Error::WidthMismatch { expected: d, actual: row.len() });
            }
            for (a, v) in acc.iter_mut().zip(row) {
                *a += t.weight * v;
            }
        }
    }
    Ok(SoftBlock { rows, terms })
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, prompt: &SoftPrompt, temperature: f64) -> Result<String>;
}

/// Returns the prompt's plain-text rendering.
#[derive(Debug, Clone, Default)]
pub struct EchoGenerator;

impl TextGenerator for EchoGenerator {
    fn generate(&self, prompt: &SoftPrompt, _temperature: f64) -> Result<String> {
        Ok(prompt.render())
    }
}

/// Replies from a fixed list, cycling.
#[derive(Debug, Default)]
pub struct ScriptedGenerator {
    replies: Vec<String>,
    next: AtomicUsize,
}

impl ScriptedGenerator {
    pub fn new(replies: impl IntoIterator<Item = impl Into<String>>) -> Self {
        ScriptedGenerator { replies: replies.into_iter().map(Into::into).collect(), next: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.next.load(Ordering::SeqCst)
    }
}

impl TextGenerator for ScriptedGenerator {
    fn generate(&self, _prompt: &SoftPrompt, _temperature: f64) -> Result<String> {
        if self.replies.is_empty() {
            return Err(Error::Provider("scripted generator has no replies".into()));
        }
        let i = self.next.fetch_add(1, Ordering::SeqCst);
        Ok(self.replies[i % self.replies.len()].clone())
    }
}

/// Offline stand-in that writes "`agent` `top term` `target`." for story
/// prompts and answers the character question with whichever name the
/// sentence mentions first.
#[derive(Debug, Clone, Default)]
pub struct TemplateGenerator;

impl TextGenerator for TemplateGenerator {
    fn generate(&self, prompt: &SoftPrompt, _temperature: f64) -> Result<String> {
        let top = prompt
            .segments
            .iter()
            .find_map(|s| match s {
                PromptSegment::Vectors { terms, .. } => terms.first().map(|t| t.term.clone()),
                PromptSegment::Text { .. } => None,
            })
            .unwrap_or_else(|| "meets".into());
        match &prompt.purpose {
            PromptPurpose::Story { agent, target } => {
                let (verb, rest) = top.split_once(' ').map_or((top.as_str(), ""), |(v, r)| (v, r));
                let verb = if verb.ends_with('s') || verb.ends_with('h') { format!("{verb}es") } else { format!("{verb}s") };
                let rest = if rest.is_empty() { String::new() } else { format!(" {rest}") };
                Ok(format!("{agent} {verb}{rest} {target}."))
            }
            PromptPurpose::ActiveCharacter { names, sentence } => {
                let pos = |n: &str| sentence.find(n).unwrap_or(usize::MAX);
                Ok(if pos(&names[1]) < pos(&names[0]) { "1" } else { "0" }.into())
            }
            PromptPurpose::Other => Ok(prompt.render()),
        }
    }
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    segments: &'a [PromptSegment],
    temperature: f64,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

/// Client for `POST /generate {"segments":[…],"temperature":t} → {"text":…}`.
#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    client: JsonClient,
}

impl RemoteGenerator {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        RemoteGenerator { client: JsonClient::new(base_url, timeout) }
    }
}

impl TextGenerator for RemoteGenerator {
    fn generate(&self, prompt: &SoftPrompt, temperature: f64) -> Result<String> {
        let resp: GenerateResponse =
            self.client.post("/generate", &GenerateRequest { segments: &prompt.segments, temperature })?;
        Ok(resp.text)
    }
}

/// For text-only backends: each vectors block becomes its top-1 term.
pub struct TextOnly<G>(pub G);

impl<G: TextGenerator> TextGenerator for TextOnly<G> {
    fn generate(&self, prompt: &SoftPrompt, temperature: f64) -> Result<String> {
        let segments = vec![PromptSegment::Text {
            value: prompt.render_with(|terms| terms.first().map(|t| t.term.clone()).unwrap_or_default()),
        }];
        self.0.generate(&SoftPrompt { segments, purpose: prompt.purpose.clone() }, temperature)
    }
}

impl<G: TextGenerator + ?Sized> TextGenerator for Box<G> {
    fn generate(&self, prompt: &SoftPrompt, temperature: f64) -> Result<String> {
        (**self).generate(prompt, temperature)
    }
}

impl<G: TextGenerator + ?Sized> TextGenerator for std::sync::Arc<G> {
    fn generate(&self, prompt: &SoftPrompt, temperature: f64) -> Result<String> {
        (**self).generate(prompt, temperature)
    }
}

/// A story sentence at the story temperature, trimmed. Empty replies are a
/// provider error so the caller can retry.
pub fn generate_sentence(generator: &dyn TextGenerator, prompt: &SoftPrompt) -> Result<String> {
    let text = generator.generate(prompt, STORY_TEMPERATURE)?;
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Provider("generator returned an empty sentence".into()));
    }
    Ok(text.to_string())
}

/// Embeds the sentence and snaps it onto the blend of its top-2 base terms.
pub fn text2action(sentence: &str, provider: &dyn EmbeddingProvider, lexicon: &Lexicon) -> Result<ActionEmbedding> {
    if sentence.trim().is_empty() {
        return Err(Error::InvalidArgument("sentence is empty".into()));
    }
    let query = provider.embed(sentence)?;
    interpolate_terms(&topk_weights(&query, lexicon, TEXT_ACTION_K)?, lexicon)
}

/// Asks the generator which character performs `action` in `sentence`.
pub fn text2char(
    sentence: &str,
    action: &ActionEmbedding,
    settings: &StorySettings,
    lexicon: &Lexicon,
    tokens: &dyn TokenEmbeddingProvider,
    generator: &dyn TextGenerator,
) -> Result<Character> {
    let block = build_soft_prompt(action, lexicon, tokens, SOFT_PROMPT_K)?;
    let prompt = build_character_prompt(settings, sentence, &block);
    parse_character_reply(&generator.generate(&prompt, CHARACTER_TEMPERATURE)?)
}
