//! Gold-action ranking and active-character accuracy over a labelled set.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{gini, Summary};
use crate::action::{cosine_similarity, normalize_similarities, rank_actions, ActionEmbedding, Lexicon};
use crate::dataset::MotionInstance;
use crate::error::{Error, Result};
use crate::motion::Character;
use crate::neural::{ModelKind, SequenceModel};
use crate::pipelines::{motion2action_step, motion2char_step};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecognition {
    pub index: usize,
    pub label: String,
    /// Position of the gold term in the similarity ranking, 1-based.
    pub gold_rank: usize,
    pub top_term: String,
    /// Gold weight divided by the weight of the top-ranked term.
    pub weight_ratio: f64,
    /// Concentration of the weights over the whole lexicon.
    pub gini: f64,
    pub char_correct: bool,
    pub predicted_char: Character,
    pub motion2action_secs: f64,
    pub motion2char_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionReport {
    pub instances: Vec<InstanceRecognition>,
    pub gold_rank: Summary,
    pub weight_ratio: Summary,
    pub gini: Summary,
    pub top1_rate: f64,
    pub char_accuracy: Summary,
    pub motion2action_secs: Summary,
    pub motion2char_secs: Summary,
}

/// Ranks every lexicon term for one embedding: returns interpolation
/// weights over the full lexicon in lexicon order.
pub fn lexicon_weights(embedding: &ActionEmbedding, lexicon: &Lexicon) -> Result<Vec<f64>> {
    if embedding.dimension() != lexicon.dimension() {
        return Err(Error::WidthMismatch { expected: lexicon.dimension(), actual: embedding.dimension() });
    }
    let sims = lexicon
        .iter()
        .map(|(_, v)| cosine_similarity(embedding.as_slice(), v.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    Ok(normalize_similarities(&sims))
}

/// Runs motion2action over the whole trajectory and returns the final embedding.
pub fn recognize_action(model: &SequenceModel, instance: &MotionInstance) -> Result<ActionEmbedding> {
    let mut state = model.fresh_state();
    let mut last = None;
    for frame in &instance.trajectory.frames {
        let (y, next) = motion2action_step(model, &state, frame)?;
        state = next;
        last = Some(y);
    }
    last.ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))
}

/// Runs motion2char over the whole trajectory with a fixed action input.
pub fn recognize_character(model: &SequenceModel, instance: &MotionInstance, action: &ActionEmbedding) -> Result<Character> {
    let mut state = model.fresh_state();
    let mut last = None;
    for frame in &instance.trajectory.frames {
        let (c, next) = motion2char_step(model, &state, frame, action)?;
        state = next;
        last = Some(c);
    }
    last.ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))
}

/// Evaluates a recognizer pair. motion2char is conditioned on the gold
/// action embedding so that its accuracy is measured in isolation.
pub fn eval_recognition(
    motion2action: &SequenceModel,
    motion2char: &SequenceModel,
    instances: &[MotionInstance],
    lexicon: &Lexicon,
) -> Result<RecognitionReport> {
    motion2action.expect_kind(ModelKind::Motion2Action)?;
    motion2char.expect_kind(ModelKind::Motion2Char)?;
    for m in [motion2action, motion2char] {
        if m.config.embedding_dim != lexicon.dimension() {
            return Err(Error::WidthMismatch { expected: lexicon.dimension(), actual: m.config.embedding_dim });
        }
    }
    if instances.is_empty() {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    let mut rows = Vec::with_capacity(instances.len());
    for (index, inst) in instances.iter().enumerate() {
        let gold_idx = lexicon.position(&inst.label).ok_or_else(|| Error::UnknownAction(inst.label.clone()))?;
        let gold = lexicon.embedding(&inst.label).expect("position found");

        let t0 = Instant::now();
        let embedding = recognize_action(motion2action, inst)?;
        let motion2action_secs = t0.elapsed().as_secs_f64();

        let weights = lexicon_weights(&embedding, lexicon)?;
        let ranked = rank_actions(&embedding, lexicon)?;
        let gold_rank = 1 + ranked.iter().position(|r| r.term == inst.label).expect("gold term is in the lexicon");
        let top_term = ranked[0].term.clone();
        let top_w = weights[lexicon.position(&top_term).expect("ranked terms come from the lexicon")];
        let gold_w = weights[gold_idx];

        let t1 = Instant::now();
        let predicted_char = recognize_character(motion2char, inst, gold)?;
        let motion2char_secs = t1.elapsed().as_secs_f64();

        rows.push(InstanceRecognition {
            index,
            label: inst.label.clone(),
            gold_rank,
            top_term,
            weight_ratio: gold_w / top_w,
            gini: gini(&weights)?,
            char_correct: predicted_char == inst.active,
            predicted_char,
            motion2action_secs,
            motion2char_secs,
        });
    }
    Ok(RecognitionReport::from_rows(rows))
}

impl RecognitionReport {
    pub fn from_rows(instances: Vec<InstanceRecognition>) -> Self {
        let col = |f: fn(&InstanceRecognition) -> f64| Summary::of(&instances.iter().map(f).collect::<Vec<_>>());
        let top1 = instances.iter().filter(|r| r.gold_rank == 1).count();
        RecognitionReport {
            gold_rank: col(|r| r.gold_rank as f64),
            weight_ratio: col(|r| r.weight_ratio),
            gini: col(|r| r.gini),
            top1_rate: top1 as f64 / instances.len().max(1) as f64,
            char_accuracy: col(|r| if r.char_correct { 1.0 } else { 0.0 }),
            motion2action_secs: col(|r| r.motion2action_secs),
            motion2char_secs: col(|r| r.motion2char_secs),
            instances,
        }
    }

    /// One CSV row per instance.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.instances {
            w.serialize(row).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}
