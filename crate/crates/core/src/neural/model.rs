use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::head::FeedforwardHead;
use super::loss::LossKind;
use super::lstm::{HiddenState, RecurrentStack};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::motion::MotionDelta;

/// The four trainable models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Motion → action embedding.
    #[serde(rename = "motion2action")]
    Motion2Action,
    /// Motion + action embedding → active character (2 logits).
    #[serde(rename = "motion2char")]
    Motion2Char,
    /// Action info + sym1 motion → next sym0 motion.
    Proactive,
    /// Action info + sym0 motion (incl. its next step) → next sym1 motion.
    Reactive,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Motion2Action, ModelKind::Motion2Char, ModelKind::Proactive, ModelKind::Reactive];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Motion2Action => "motion2action",
            ModelKind::Motion2Char => "motion2char",
            ModelKind::Proactive => "proactive",
            ModelKind::Reactive => "reactive",
        }
    }

    pub fn loss(self) -> LossKind {
        match self {
            ModelKind::Motion2Action => LossKind::MeanAbsolute,
            ModelKind::Motion2Char => LossKind::CrossEntropy,
            ModelKind::Proactive | ModelKind::Reactive => LossKind::MeanSquared,
        }
    }

    /// Width of the conditioning concatenated after the LSTM output.
    fn head_extra(self, embedding_dim: usize) -> usize {
        match self {
            ModelKind::Motion2Action => 0,
            ModelKind::Motion2Char => embedding_dim,
            ModelKind::Proactive => embedding_dim + 1,
            ModelKind::Reactive => embedding_dim + 1 + 3,
        }
    }

    fn output(self, embedding_dim: usize) -> usize {
        match self {
            ModelKind::Motion2Action => embedding_dim,
            ModelKind::Motion2Char => 2,
            ModelKind::Proactive | ModelKind::Reactive => 3,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Published model sizes (thousands of hidden units).
    Paper,
    /// 64-wide, 2-layer stacks that train in seconds on a CPU.
    Desk,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            _ => Err(Error::InvalidArgument(format!("unknown preset `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    pub head_hidden: usize,
    pub embedding_dim: usize,
}

impl ModelConfig {
    /// All LSTMs read six features per frame.
    pub const INPUT_WIDTH: usize = 6;

    pub fn preset(kind: ModelKind, preset: Preset, embedding_dim: usize) -> Self {
        let (hidden, layers) = match (preset, kind) {
            (Preset::Desk, _) => (64, 2),
            (Preset::Paper, ModelKind::Motion2Action) => (4096, 8),
            (Preset::Paper, ModelKind::Motion2Char) => (512, 4),
            (Preset::Paper, ModelKind::Proactive | ModelKind::Reactive) => (4096, 6),
        };
        ModelConfig { kind, input: Self::INPUT_WIDTH, hidden, layers, head_hidden: hidden, embedding_dim }
    }

    pub fn head_input(&self) -> usize {
        self.hidden + self.kind.head_extra(self.embedding_dim)
    }

    pub fn output(&self) -> usize {
        self.kind.output(self.embedding_dim)
    }
}

/// Every trainable tensor of a model. Also used as the gradient and
/// optimizer-moment container, with identical layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub stack: RecurrentStack,
    pub head: FeedforwardHead,
}

impl ModelParams {
    pub fn zeros_like(&self) -> Self {
        ModelParams { stack: self.stack.zeros_like(), head: self.head.zeros_like() }
    }

    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        self.stack.tensors().chain(self.head.tensors()).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.stack.tensors_mut().chain(self.head.tensors_mut()).collect()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

/// An LSTM stack plus feedforward head, configured for one [`ModelKind`].
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    pub config: ModelConfig,
    pub params: ModelParams,
}

/// Conditioning appended to the LSTM output before the head.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeadConditioning<'a> {
    pub action: Option<&'a [f64]>,
    pub indicator: Option<f64>,
    pub sym0_next: Option<MotionDelta>,
}

impl SequenceModel {
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stack = RecurrentStack::new(config.input, config.hidden, config.layers, &mut rng);
        let head = FeedforwardHead::new(config.head_input(), config.head_hidden, config.output(), &mut rng);
        SequenceModel { config, params: ModelParams { stack, head } }
    }

    /// All parameters zero; the model outputs zeros everywhere.
    pub fn zeroed(config: ModelConfig) -> Self {
        let mut m = SequenceModel::new(config, 0);
        m.params = m.params.zeros_like();
        m
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind() == kind {
            Ok(())
        } else {
            Err(Error::KindMismatch { expected: kind.to_string(), actual: self.kind().to_string() })
        }
    }

    pub fn fresh_state(&self) -> HiddenState {
        self.params.stack.fresh_state()
    }

    /// Concatenates `[h, action?, indicator?, sym0_next?]` after checking the
    /// pieces this kind requires are present.
    pub fn head_input(&self, h: &[f64], cond: HeadConditioning<'_>) -> Result<Vec<f64>> {
        let kind = self.kind();
        let needs_action = kind != ModelKind::Motion2Action;
        let needs_indicator = matches!(kind, ModelKind::Proactive | ModelKind::Reactive);
        let needs_next = kind == ModelKind::Reactive;
        let missing = |what: &str| Error::InvalidArgument(format!("{kind} head needs {what}"));
        let mut x = Vec::with_capacity(self.config.head_input());
        x.extend_from_slice(h);
        if needs_action {
            let a = cond.action.ok_or_else(|| missing("an action embedding"))?;
            if a.len() != self.config.embedding_dim {
                return Err(Error::WidthMismatch { expected: self.config.embedding_dim, actual: a.len() });
            }
            x.extend_from_slice(a);
        }
        if needs_indicator {
            x.push(cond.indicator.ok_or_else(|| missing("an active-character indicator"))?);
        }
        if needs_next {
            x.extend(cond.sym0_next.ok_or_else(|| missing("sym0's next motion"))?.to_array());
        }
        Ok(x)
    }

    /// One inference step: LSTM over `features`, then the head.
    pub fn step(&self, features: &[f64], state: &HiddenState, cond: HeadConditioning<'_>) -> Result<(Vec<f64>, HiddenState)> {
        let (h, next) = self.params.stack.step(features, state)?;
        let y = self.params.head.forward(&self.head_input(&h, cond)?)?;
        Ok((y, next))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_roundtrip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("motion2text".parse::<ModelKind>().is_err());
    }

    #[test]
    fn presets_match_published_sizes() {
        let m2a = ModelConfig::preset(ModelKind::Motion2Action, Preset::Paper, 384);
        assert_eq!((m2a.hidden, m2a.layers, m2a.head_hidden), (4096, 8, 4096));
        let m2c = ModelConfig::preset(ModelKind::Motion2Char, Preset::Paper, 384);
        assert_eq!((m2c.hidden, m2c.layers, m2c.head_hidden), (512, 4, 512));
        let pro = ModelConfig::preset(ModelKind::Proactive, Preset::Paper, 384);
        assert_eq!((pro.hidden, pro.layers), (4096, 6));
        let desk = ModelConfig::preset(ModelKind::Reactive, Preset::Desk, 384);
        assert_eq!((desk.hidden, desk.layers), (64, 2));
        assert_eq!(desk.head_input(), 64 + 384 + 1 + 3);
        assert_eq!(m2c.output(), 2);
    }

    #[test]
    fn head_input_requires_conditioning() {
        let m = SequenceModel::new(ModelConfig::preset(ModelKind::Reactive, Preset::Desk, 4), 0);
        let h = vec![0.0; 64];
        let action = [1.0, 0.0, 0.0, 0.0];
        let ok = HeadConditioning { action: Some(&action), indicator: Some(1.0), sym0_next: Some(MotionDelta::new(0.1, 0.2, 0.3)) };
        assert_eq!(m.head_input(&h, ok).unwrap().len(), 64 + 4 + 1 + 3);
        assert!(m.head_input(&h, HeadConditioning { sym0_next: None, ..ok }).is_err());
        assert!(m.head_input(&h, HeadConditioning { action: Some(&action[..2]), ..ok }).is_err());
        assert!(m.expect_kind(ModelKind::Proactive).is_err());
    }
}
