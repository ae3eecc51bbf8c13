use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ActionEmbedding;
use crate::error::{Error, Result};
use crate::remote::JsonClient;

/// Published width of the default sentence-embedding model.
pub const EMBEDDING_FILE_DIMENSION_DEFAULT: usize = 384;

/// Sentence embedder. Implementations must be deterministic for a fixed text.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<ActionEmbedding>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<ActionEmbedding>> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

fn normalize_key(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// On-disk form: `{"dimension": D, "entries": {"hug": [...], ...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingFile {
    pub dimension: usize,
    pub entries: BTreeMap<String, Vec<f64>>,
}

/// Precomputed text → vector table. Lookups ignore case and repeated
/// whitespace; unknown text is an error.
#[derive(Debug, Clone)]
pub struct TableEmbeddings {
    dimension: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

impl TableEmbeddings {
    pub fn new(file: EmbeddingFile) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, v) in file.entries {
            if v.len() != file.dimension {
                return Err(Error::WidthMismatch { expected: file.dimension, actual: v.len() });
            }
            entries.insert(normalize_key(&k), v);
        }
        Ok(TableEmbeddings { dimension: file.dimension, entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        TableEmbeddings::new(serde_json::from_str(&text)?)
    }

    pub fn to_file(&self) -> EmbeddingFile {
        EmbeddingFile { dimension: self.dimension, entries: self.entries.clone() }
    }
}

impl EmbeddingProvider for TableEmbeddings {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<ActionEmbedding> {
        self.entries
            .get(&normalize_key(text))
            .map(|v| ActionEmbedding(v.clone()))
            .ok_or_else(|| Error::Provider(format!("no table entry for {text:?}")))
    }
}

/// Deterministic stand-in embedder: every lowercase word hashes (with the
/// seed) to a Gaussian vector; a text embeds to the normalized sum of its
/// words. Texts sharing words therefore land near each other.
#[derive(Debug, Clone)]
pub struct PseudoEmbeddings {
    dimension: usize,
    seed: u64,
}

impl PseudoEmbeddings {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        PseudoEmbeddings { dimension, seed }
    }

    fn word_vector(&self, word: &str) -> Vec<f64> {
        hashed_gaussian(self.seed, word, self.dimension)
    }
}

pub(crate) fn hashed_gaussian(seed: u64, key: &str, dimension: usize) -> Vec<f64> {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(digest);
    (0..dimension).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub(crate) fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl EmbeddingProvider for PseudoEmbeddings {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<ActionEmbedding> {
        let words = words(text);
        if words.is_empty() {
            return Err(Error::Provider(format!("nothing to embed in {text:?}")));
        }
        let mut sum = vec![0.0; self.dimension];
        for w in &words {
            for (s, v) in sum.iter_mut().zip(self.word_vector(w)) {
                *s += v;
            }
        }
        let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(ActionEmbedding(sum.into_iter().map(|v| v / norm).collect()))
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dimension: usize,
    vectors: Vec<Vec<f64>>,
}

/// Client for `POST /embed {"texts":[…]} → {"dimension":D,"vectors":[…]}`.
#[derive(Debug, Clone)]
pub struct RemoteEmbeddings {
    client: JsonClient,
    dimension: usize,
}

impl RemoteEmbeddings {
    pub fn new(base_url: impl Into<String>, dimension: usize, timeout: Duration) -> Self {
        RemoteEmbeddings { client: JsonClient::new(base_url, timeout), dimension }
    }
}

impl EmbeddingProvider for RemoteEmbeddings {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<ActionEmbedding> {
        let mut v = self.embed_batch(&[text])?;
        v.pop().ok_or_else(|| Error::Provider("empty embedding response".into()))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<ActionEmbedding>> {
        let resp: EmbedResponse = self.client.post("/embed", &EmbedRequest { texts })?;
        if resp.dimension != self.dimension {
            return Err(Error::WidthMismatch { expected: self.dimension, actual: resp.dimension });
        }
        if resp.vectors.len() != texts.len() {
            return Err(Error::Provider(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                resp.vectors.len()
            )));
        }
        resp.vectors
            .into_iter()
            .map(|v| {
                if v.len() == self.dimension {
                    Ok(ActionEmbedding(v))
                } else {
                    Err(Error::WidthMismatch { expected: self.dimension, actual: v.len() })
                }
            })
            .collect()
    }
}
