//! Versioned JSON checkpoints with base64-encoded little-endian f64 tensors.

use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::model::{ModelConfig, SequenceModel};
use super::train::TrainConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "storyplay-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: SequenceModel,
    pub train_config: Option<TrainConfig>,
    pub meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct EncodedTensor {
    name: String,
    shape: Vec<usize>,
    data: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: ModelConfig,
    train_config: Option<TrainConfig>,
    meta: TrainingMeta,
    tensors: Vec<EncodedTensor>,
}

fn encode(data: &[f64]) -> String {
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn decode(s: &str) -> Result<Vec<f64>> {
    let bytes = B64.decode(s).map_err(|e| Error::Checkpoint(format!("bad tensor encoding: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Checkpoint("tensor byte length is not a multiple of 8".into()));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

impl Checkpoint {
    pub fn new(model: SequenceModel) -> Self {
        Checkpoint { model, train_config: None, meta: TrainingMeta::default() }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.model.config,
            train_config: self.train_config,
            meta: self.meta,
            tensors: self
                .model
                .params
                .tensors()
                .into_iter()
                .map(|(name, t)| EncodedTensor { name, shape: t.shape.clone(), data: encode(&t.data) })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(json)?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("not a checkpoint (format `{}`)", file.format)));
        }
        if file.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", file.version)));
        }
        let mut model = SequenceModel::zeroed(file.config);
        let names: Vec<String> = model.params.tensors().into_iter().map(|(n, _)| n).collect();
        if names.len() != file.tensors.len() {
            return Err(Error::Checkpoint(format!("expected {} tensors, found {}", names.len(), file.tensors.len())));
        }
        for ((name, slot), enc) in names.iter().zip(model.params.tensors_mut()).zip(&file.tensors) {
            if *name != enc.name || slot.shape != enc.shape {
                return Err(Error::Checkpoint(format!(
                    "tensor `{}` {:?} does not fit slot `{name}` {:?}",
                    enc.name, enc.shape, slot.shape
                )));
            }
            let data = decode(&enc.data)?;
            if data.len() != slot.len() {
                return Err(Error::Checkpoint(format!("tensor `{name}` has {} values, expected {}", data.len(), slot.len())));
            }
            slot.data = data;
        }
        Ok(Checkpoint { model, train_config: file.train_config, meta: file.meta })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Checkpoint::from_json(&std::fs::read_to_string(path)?)
    }
}
