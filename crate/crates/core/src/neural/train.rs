//! Training loops for the four sequence models.
//!
//! Every instance is one sequence processed with full backpropagation through
//! time; a batch averages per-instance gradients. Per-step losses are averaged
//! over the sequence. The generators run with modified teacher forcing, their
//! own previous outputs entering the next step's features as constants.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, TrainingMeta};
use super::loss::{loss_and_grad, LossKind, Target};
use super::lstm::StepCache;
use super::head::HeadCache;
use super::model::{HeadConditioning, ModelConfig, ModelKind, ModelParams, Preset, SequenceModel};
use super::optim::{adam_step, clip_grad_norm, AdamConfig, AdamState};
use super::teacher::{teacher_forced_features, GeneratorRole};
use crate::action::{ActionEmbedding, Lexicon};
use crate::dataset::{DatasetSplit, MotionInstance};
use crate::error::{Error, Result};
use crate::motion::MotionDelta;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub grad_clip_norm: f64,
    pub loss: LossKind,
    pub seed: u64,
}

impl TrainConfig {
    pub fn preset(kind: ModelKind, preset: Preset) -> Self {
        let (learning_rate, batch_size, epochs) = match (preset, kind) {
            (Preset::Paper, ModelKind::Motion2Action) => (1e-5, 8, 50),
            (Preset::Paper, ModelKind::Motion2Char) => (3e-5, 8, 200),
            (Preset::Paper, ModelKind::Proactive) => (1e-5, 32, 200),
            (Preset::Paper, ModelKind::Reactive) => (1e-4, 32, 200),
            (Preset::Desk, ModelKind::Motion2Action) => (3e-3, 2, 200),
            (Preset::Desk, ModelKind::Motion2Char) => (3e-3, 2, 200),
            (Preset::Desk, ModelKind::Proactive | ModelKind::Reactive) => (2e-3, 2, 200),
        };
        TrainConfig { learning_rate, batch_size, epochs, grad_clip_norm: 5.0, loss: kind.loss(), seed: 0 }
    }

    pub fn validate(&self, kind: ModelKind) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch size and epochs must be positive");
        }
        if self.grad_clip_norm.is_nan() || self.grad_clip_norm <= 0.0 {
            return bad("gradient clip norm must be positive");
        }
        let classify = kind == ModelKind::Motion2Char;
        if classify != (self.loss == LossKind::CrossEntropy) {
            return Err(Error::InvalidArgument(format!("{kind} cannot train with {:?} loss", self.loss)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest test loss (train loss when
    /// there is no test set).
    pub checkpoint: Checkpoint,
    pub curve: Vec<EpochStats>,
}

/// One training sequence with its gold action embedding.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub instance: &'a MotionInstance,
    pub gold: &'a ActionEmbedding,
}

fn gold_for<'a>(inst: &MotionInstance, lexicon: &'a Lexicon) -> Result<&'a ActionEmbedding> {
    lexicon.embedding(&inst.label).ok_or_else(|| Error::UnknownAction(inst.label.clone()))
}

pub fn samples<'a>(instances: &'a [MotionInstance], lexicon: &'a Lexicon) -> Result<Vec<Sample<'a>>> {
    instances.iter().map(|i| Ok(Sample { instance: i, gold: gold_for(i, lexicon)? })).collect()
}

struct StepRecord {
    stack: StepCache,
    head: HeadCache,
    dy: Vec<f64>,
}

/// Mean per-step loss of one sequence; with `grads`, also accumulates the
/// parameter gradient. `None` when the sequence has no training step.
fn sequence_pass(
    model: &SequenceModel,
    sample: Sample<'_>,
    loss: LossKind,
    grads: Option<&mut ModelParams>,
) -> Result<Option<f64>> {
    let kind = model.kind();
    let frames = &sample.instance.trajectory.frames;
    let active = sample.instance.active;
    let gold = sample.gold.as_slice();
    let n_steps = match kind {
        ModelKind::Motion2Action | ModelKind::Motion2Char => frames.len(),
        ModelKind::Proactive | ModelKind::Reactive => frames.len().saturating_sub(1),
    };
    if n_steps == 0 {
        return Ok(None);
    }
    let keep = grads.is_some();
    let mut state = model.fresh_state();
    let mut records = Vec::with_capacity(if keep { n_steps } else { 0 });
    let mut total = 0.0;
    let mut generated: Option<MotionDelta> = None;
    for t in 0..n_steps {
        let frame = &frames[t];
        let prev = t.checked_sub(1).map(|p| &frames[p]);
        let mut target_values = [0.0; 3];
        let (features, cond, class) = match kind {
            ModelKind::Motion2Action => (frame.to_array(), HeadConditioning::default(), None),
            ModelKind::Motion2Char => {
                (frame.to_array(), HeadConditioning { action: Some(gold), ..Default::default() }, Some(active.index()))
            }
            ModelKind::Proactive | ModelKind::Reactive => {
                let role = if kind == ModelKind::Proactive { GeneratorRole::Proactive } else { GeneratorRole::Reactive };
                let feats = teacher_forced_features(role, frame, prev, generated)?.to_array();
                let next = &frames[t + 1];
                let indicator = if kind == ModelKind::Proactive { active } else { active.other() };
                let sym0_next =
                    (kind == ModelKind::Reactive).then(|| MotionDelta::between(frame.poses[0], next.poses[0]));
                let gen = role.generated();
                target_values = MotionDelta::between(frame.pose(gen), next.pose(gen)).to_array();
                (feats, HeadConditioning { action: Some(gold), indicator: Some(indicator.as_f64()), sym0_next }, None)
            }
        };
        let target = match (kind, class) {
            (_, Some(c)) => Target::Class(c),
            (ModelKind::Motion2Action, None) => Target::Values(gold),
            _ => Target::Values(&target_values),
        };
        let (h, stack_cache) = model.params.stack.step_cached(&features, &mut state)?;
        let (y, head_cache) = model.params.head.forward_cached(&model.head_input(&h, cond)?)?;
        let (l, dy) = loss_and_grad(loss, &y, target)?;
        if !l.is_finite() {
            return Ok(Some(l));
        }
        total += l;
        if matches!(kind, ModelKind::Proactive | ModelKind::Reactive) {
            generated = Some(MotionDelta::new(y[0], y[1], y[2]));
        }
        if keep {
            records.push(StepRecord { stack: stack_cache, head: head_cache, dy });
        }
    }
    let n = n_steps as f64;
    if let Some(grads) = grads {
        let hidden = model.config.hidden;
        let mut stack_caches = Vec::with_capacity(records.len());
        let mut d_outputs = Vec::with_capacity(records.len());
        for rec in records {
            let dy: Vec<f64> = rec.dy.iter().map(|v| v / n).collect();
            let dx = model.params.head.backward(&rec.head, &dy, &mut grads.head);
            d_outputs.push(dx[..hidden].to_vec());
            stack_caches.push(rec.stack);
        }
        model.params.stack.backward(&stack_caches, &d_outputs, &mut grads.stack);
    }
    Ok(Some(total / n))
}

/// Loss of one sequence without gradients.
pub fn instance_loss(model: &SequenceModel, sample: Sample<'_>, loss: LossKind) -> Result<Option<f64>> {
    sequence_pass(model, sample, loss, None)
}

/// Loss of one sequence and its gradient for every parameter.
pub fn instance_gradients(model: &SequenceModel, sample: Sample<'_>, loss: LossKind) -> Result<(f64, ModelParams)> {
    let mut grads = model.params.zeros_like();
    let l = sequence_pass(model, sample, loss, Some(&mut grads))?.unwrap_or(0.0);
    Ok((l, grads))
}

/// Mean loss over samples that have at least one training step.
pub fn mean_loss(model: &SequenceModel, samples: &[Sample<'_>], loss: LossKind) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut n = 0usize;
    for s in samples {
        if let Some(l) = instance_loss(model, *s, loss)? {
            total += l;
            n += 1;
        }
    }
    Ok((n > 0).then(|| total / n as f64))
}

pub fn train(
    config: ModelConfig,
    split: &DatasetSplit,
    lexicon: &Lexicon,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    cfg.validate(config.kind)?;
    if split.train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if config.embedding_dim != lexicon.dimension() {
        return Err(Error::WidthMismatch { expected: lexicon.dimension(), actual: config.embedding_dim });
    }
    let train_samples = samples(&split.train, lexicon)?;
    let test_samples = samples(&split.test, lexicon)?;
    let mut model = SequenceModel::new(config, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut adam = AdamState::default();
    let mut order: Vec<usize> = (0..train_samples.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, ModelParams, TrainingMeta)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.params.zeros_like();
            let mut used = 0usize;
            for &i in batch {
                if let Some(l) = sequence_pass(&model, train_samples[i], cfg.loss, Some(&mut grads))? {
                    if !l.is_finite() {
                        return Err(Error::Diverged { epoch, loss: l });
                    }
                    used += 1;
                }
            }
            if used == 0 {
                continue;
            }
            grads.scale(1.0 / used as f64);
            let mut g = grads.tensors_mut();
            clip_grad_norm(&mut g, cfg.grad_clip_norm);
            let g: Vec<&_> = g.into_iter().map(|t| &*t).collect();
            adam_step(&mut model.params.tensors_mut(), &g, &mut adam, cfg.learning_rate, AdamConfig::default());
        }
        let train_loss = mean_loss(&model, &train_samples, cfg.loss)?.unwrap_or(0.0);
        let test_loss = mean_loss(&model, &test_samples, cfg.loss)?;
        if !train_loss.is_finite() || test_loss.is_some_and(|l| !l.is_finite()) {
            return Err(Error::Diverged { epoch, loss: test_loss.filter(|l| !l.is_finite()).unwrap_or(train_loss) });
        }
        let stats = EpochStats { epoch, train_loss, test_loss };
        on_epoch(&stats);
        curve.push(stats);
        let score = test_loss.unwrap_or(train_loss);
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, model.params.clone(), TrainingMeta { epoch, train_loss, test_loss }));
        }
    }

    let (_, params, meta) = best.expect("at least one epoch ran");
    model.params = params;
    Ok(TrainOutcome { checkpoint: Checkpoint { model, train_config: Some(*cfg), meta }, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::PseudoEmbeddings;
    use crate::dataset::synthetic::synthetic_instances;

    fn tiny(kind: ModelKind, dim: usize) -> ModelConfig {
        ModelConfig { kind, input: 6, hidden: 8, layers: 1, head_hidden: 8, embedding_dim: dim }
    }

    #[test]
    fn validates_config() {
        let mut c = TrainConfig::preset(ModelKind::Motion2Char, Preset::Desk);
        assert!(c.validate(ModelKind::Motion2Char).is_ok());
        assert!(c.validate(ModelKind::Motion2Action).is_err());
        c.batch_size = 0;
        assert!(c.validate(ModelKind::Motion2Char).is_err());
        let p = TrainConfig::preset(ModelKind::Motion2Action, Preset::Paper);
        assert_eq!((p.learning_rate, p.batch_size, p.epochs, p.grad_clip_norm), (1e-5, 8, 50, 5.0));
        let p = TrainConfig::preset(ModelKind::Motion2Char, Preset::Paper);
        assert_eq!((p.learning_rate, p.batch_size, p.epochs), (3e-5, 8, 200));
        let p = TrainConfig::preset(ModelKind::Reactive, Preset::Paper);
        assert_eq!((p.learning_rate, p.batch_size, p.epochs), (1e-4, 32, 200));
    }

    #[test]
    fn zero_loss_gives_zero_gradients() {
        let lex = Lexicon::base(&PseudoEmbeddings::new(4, 0)).unwrap();
        let inst = &synthetic_instances(1, 5, 10, 0)[0];
        let gold = ActionEmbedding(vec![0.0; 4]);
        let model = SequenceModel::zeroed(tiny(ModelKind::Motion2Action, 4));
        let (l, g) = instance_gradients(&model, Sample { instance: inst, gold: &gold }, LossKind::MeanSquared).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.tensors().iter().all(|(_, t)| t.data.iter().all(|v| *v == 0.0)));
        drop(lex);
    }

    #[test]
    fn empty_training_set_rejected() {
        let lex = Lexicon::base(&PseudoEmbeddings::new(4, 0)).unwrap();
        let cfg = TrainConfig::preset(ModelKind::Motion2Action, Preset::Desk);
        assert!(train(tiny(ModelKind::Motion2Action, 4), &DatasetSplit::default(), &lex, &cfg, |_| {}).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let lex = Lexicon::base(&PseudoEmbeddings::new(4, 0)).unwrap();
        let mut inst = synthetic_instances(1, 5, 10, 0);
        inst[0].trajectory.frames[2].poses[0].x = f64::MAX;
        let split = DatasetSplit { train: inst, test: vec![] };
        let cfg = TrainConfig { epochs: 2, ..TrainConfig::preset(ModelKind::Proactive, Preset::Desk) };
        let err = train(tiny(ModelKind::Proactive, 4), &split, &lex, &cfg, |_| {}).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }

    #[test]
    fn short_runs_reduce_loss_for_every_kind() {
        let lex = Lexicon::base(&PseudoEmbeddings::new(8, 0)).unwrap();
        let split = DatasetSplit { train: synthetic_instances(4, 12, 10, 0), test: synthetic_instances(2, 12, 10, 0) };
        for kind in ModelKind::ALL {
            let cfg = TrainConfig { epochs: 15, learning_rate: 1e-2, ..TrainConfig::preset(kind, Preset::Desk) };
            let out = train(tiny(kind, 8), &split, &lex, &cfg, |_| {}).unwrap();
            let first = out.curve.first().unwrap().train_loss;
            let last = out.curve.last().unwrap().train_loss;
            assert!(last < first, "{kind}: {first} -> {last}");
            let best = out.curve.iter().map(|e| e.test_loss.unwrap()).fold(f64::INFINITY, f64::min);
            assert_eq!(out.checkpoint.meta.test_loss, Some(best));
        }
    }
}
