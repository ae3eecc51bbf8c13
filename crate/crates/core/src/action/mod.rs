//! The translational layer: action embeddings anchored by the 31 base
//! two-character action terms, cosine ranking, and top-k interpolation.

pub(crate) mod provider;

pub use provider::{EmbeddingFile, EmbeddingProvider, PseudoEmbeddings, RemoteEmbeddings, TableEmbeddings, EMBEDDING_FILE_DIMENSION_DEFAULT};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::Character;

/// Base action terms, in lexicon order.
pub const BASE_ACTIONS: [&str; 31] = [
    "accompany", "approach", "argue with", "avoid", "bother", "capture", "chase",
    "creep up on", "encircle", "escape", "examine", "fight", "flirt with", "follow",
    "herd", "hit", "huddle with", "hug", "ignore", "kiss", "lead", "leave", "mimic",
    "play with", "poke", "pull", "push", "scratch", "talk to", "throw", "tickle",
];

/// Terms whose presence among the top-k switches on the "caused by the other
/// character" clause of the story prompt.
pub const ESCAPE_TRIGGERS: [&str; 4] = ["avoid", "escape", "ignore", "leave"];

/// k used when turning a recognized action into a soft prompt.
pub const SOFT_PROMPT_K: usize = 4;
/// k used when turning story text into an action embedding.
pub const TEXT_ACTION_K: usize = 2;

/// Which character is the agent of the current action.
pub type ActiveCharacter = Character;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionEmbedding(pub Vec<f64>);

impl ActionEmbedding {
    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for ActionEmbedding {
    fn from(v: Vec<f64>) -> Self {
        ActionEmbedding(v)
    }
}

/// An action embedding together with its active-character indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionInfo {
    pub embedding: ActionEmbedding,
    pub active: ActiveCharacter,
}

/// Ordered `(term, embedding)` pairs. [`Lexicon::base`] builds the 31-term
/// lexicon; [`Lexicon::new`] accepts arbitrary entries for experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    terms: Vec<String>,
    vectors: Vec<ActionEmbedding>,
    dimension: usize,
}

impl Lexicon {
    pub fn new(entries: Vec<(String, ActionEmbedding)>) -> Result<Self> {
        let dimension = entries
            .first()
            .map(|(_, v)| v.dimension())
            .ok_or_else(|| Error::InvalidArgument("empty lexicon".into()))?;
        let mut terms = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len());
        for (term, v) in entries {
            if v.dimension() != dimension {
                return Err(Error::WidthMismatch { expected: dimension, actual: v.dimension() });
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite embedding for `{term}`")));
            }
            if terms.contains(&term) {
                return Err(Error::InvalidArgument(format!("duplicate lexicon term `{term}`")));
            }
            terms.push(term);
            vectors.push(v);
        }
        Ok(Lexicon { terms, vectors, dimension })
    }

    /// Embeds every base action term once with `provider`.
    pub fn base(provider: &dyn EmbeddingProvider) -> Result<Self> {
        let vectors = provider.embed_batch(&BASE_ACTIONS)?;
        Lexicon::new(BASE_ACTIONS.iter().map(|t| t.to_string()).zip(vectors).collect())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn position(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    pub fn embedding(&self, term: &str) -> Option<&ActionEmbedding> {
        self.position(term).map(|i| &self.vectors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ActionEmbedding)> {
        self.terms.iter().map(String::as_str).zip(&self.vectors)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAction {
    pub term: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedAction {
    pub term: String,
    pub weight: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::WidthMismatch { expected: a.len(), actual: b.len() });
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// All lexicon terms sorted by descending cosine similarity to `query`.
/// Equal similarities keep lexicon order.
pub fn rank_actions(query: &ActionEmbedding, lexicon: &Lexicon) -> Result<Vec<RankedAction>> {
    if query.dimension() != lexicon.dimension() {
        return Err(Error::WidthMismatch { expected: lexicon.dimension(), actual: query.dimension() });
    }
    let mut ranked = lexicon
        .iter()
        .map(|(term, v)| {
            Ok(RankedAction { term: term.to_string(), similarity: cosine_similarity(query.as_slice(), v.as_slice())? })
        })
        .collect::<Result<Vec<_>>>()?;
    // sort_by is stable
    ranked.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
    Ok(ranked)
}

/// Turns raw similarities into interpolation weights: negatives clamp to 0,
/// the rest are L1-normalized; all-zero input falls back to uniform.
pub fn normalize_similarities(similarities: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = similarities.iter().map(|s| s.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total > 0.0 {
        clamped.iter().map(|s| s / total).collect()
    } else {
        vec![1.0 / similarities.len() as f64; similarities.len()]
    }
}

pub fn topk_weights(query: &ActionEmbedding, lexicon: &Lexicon, k: usize) -> Result<Vec<WeightedAction>> {
    if k == 0 || k > lexicon.len() {
        return Err(Error::InvalidArgument(format!("k must be in 1..={}, got {k}", lexicon.len())));
    }
    let top: Vec<RankedAction> = rank_actions(query, lexicon)?.into_iter().take(k).collect();
    let sims: Vec<f64> = top.iter().map(|r| r.similarity).collect();
    Ok(top
        .into_iter()
        .zip(normalize_similarities(&sims))
        .map(|(r, weight)| WeightedAction { term: r.term, weight })
        .collect())
}

/// Convex combination `Σ wᵢ·vᵢ`.
pub fn interpolate(weights: &[f64], vectors: &[&[f64]]) -> Result<Vec<f64>> {
    if weights.len() != vectors.len() || vectors.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} vectors",
            weights.len(),
            vectors.len()
        )));
    }
    if weights.iter().any(|w| *w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("weights must be non-negative and sum to 1".into()));
    }
    let dim = vectors[0].len();
    let mut out = vec![0.0; dim];
    for (w, v) in weights.iter().zip(vectors) {
        if v.len() != dim {
            return Err(Error::WidthMismatch { expected: dim, actual: v.len() });
        }
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += w * x;
        }
    }
    Ok(out)
}

/// Interpolates the lexicon vectors of already-weighted terms.
pub fn interpolate_terms(weighted: &[WeightedAction], lexicon: &Lexicon) -> Result<ActionEmbedding> {
    let vectors = weighted
        .iter()
        .map(|w| {
            lexicon
                .embedding(&w.term)
                .map(|e| e.as_slice())
                .ok_or_else(|| Error::UnknownAction(w.term.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = weighted.iter().map(|w| w.weight).collect();
    interpolate(&weights, &vectors).map(ActionEmbedding)
}
