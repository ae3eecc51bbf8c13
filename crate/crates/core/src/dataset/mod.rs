//! Two-character motion corpora: the JSON container format, frame-rate
//! subsampling and seeded train/test splits.

pub mod synthetic;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::BASE_ACTIONS;
use crate::error::{Error, Result};
use crate::motion::{Character, Frame, Trajectory};

pub const MAX_DURATION_SECS: f64 = 60.0;
/// Frame rate of the source recordings.
pub const SOURCE_FPS: u32 = 50;
pub const PAPER_TRAIN_SIZE: usize = 924;
pub const PAPER_TEST_SIZE: usize = 232;

#[derive(Debug, Clone, PartialEq)]
pub struct MotionInstance {
    pub trajectory: Trajectory,
    pub label: String,
    pub active: Character,
}

impl MotionInstance {
    pub fn duration_secs(&self) -> f64 {
        self.trajectory.duration_secs()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<MotionInstance>,
    pub test: Vec<MotionInstance>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusFile {
    instances: Vec<CorpusInstance>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusInstance {
    label: String,
    active_char: u8,
    fps: u32,
    frames: Vec<Vec<f64>>,
}

/// Raw coordinate extent of the source scene; coordinates are divided by it
/// on load and multiplied back on save.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneScale {
    pub width: f64,
    pub height: f64,
}

impl Default for SceneScale {
    fn default() -> Self {
        SceneScale { width: 1.0, height: 1.0 }
    }
}

fn invalid(index: usize, reason: impl Into<String>) -> Error {
    Error::InvalidInstance { index, reason: reason.into() }
}

fn validate(index: usize, raw: CorpusInstance, scale: SceneScale) -> Result<MotionInstance> {
    if !BASE_ACTIONS.contains(&raw.label.as_str()) {
        return Err(invalid(index, format!("unknown action label `{}`", raw.label)));
    }
    let active = Character::from_index(raw.active_char as usize)
        .ok_or_else(|| invalid(index, format!("active_char must be 0 or 1, got {}", raw.active_char)))?;
    if raw.fps == 0 {
        return Err(invalid(index, "fps must be positive"));
    }
    if raw.frames.is_empty() {
        return Err(invalid(index, "no frames"));
    }
    let duration = raw.frames.len() as f64 / raw.fps as f64;
    if duration > MAX_DURATION_SECS {
        return Err(invalid(index, format!("duration {duration:.2} s exceeds {MAX_DURATION_SECS} s")));
    }
    let mut frames = Vec::with_capacity(raw.frames.len());
    for (t, row) in raw.frames.into_iter().enumerate() {
        match row.len() {
            6 => {}
            n if n > 6 && n % 3 == 0 => {
                return Err(invalid(index, format!("frame {t} has {} characters; only two are supported", n / 3)))
            }
            n => return Err(invalid(index, format!("frame {t} has {n} values, expected 6"))),
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(invalid(index, format!("frame {t} has a non-finite value")));
        }
        frames.push(Frame::from_array(
            t,
            [row[0] / scale.width, row[1] / scale.height, row[2], row[3] / scale.width, row[4] / scale.height, row[5]],
        ));
    }
    Ok(MotionInstance { trajectory: Trajectory { frames, fps: raw.fps }, label: raw.label, active })
}

pub fn parse_corpus(json: &str, scale: SceneScale) -> Result<Vec<MotionInstance>> {
    let file: CorpusFile = serde_json::from_str(json)?;
    file.instances.into_iter().enumerate().map(|(i, raw)| validate(i, raw, scale)).collect()
}

pub fn load_charades(path: impl AsRef<Path>, scale: SceneScale) -> Result<Vec<MotionInstance>> {
    parse_corpus(&std::fs::read_to_string(path)?, scale)
}

pub fn corpus_to_json(instances: &[MotionInstance], scale: SceneScale) -> Result<String> {
    let file = CorpusFile {
        instances: instances
            .iter()
            .map(|inst| CorpusInstance {
                label: inst.label.clone(),
                active_char: inst.active.index() as u8,
                fps: inst.trajectory.fps,
                frames: inst
                    .trajectory
                    .frames
                    .iter()
                    .map(|f| {
                        let [x0, y0, r0, x1, y1, r1] = f.to_array();
                        vec![x0 * scale.width, y0 * scale.height, r0, x1 * scale.width, y1 * scale.height, r1]
                    })
                    .collect(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn save_corpus(path: impl AsRef<Path>, instances: &[MotionInstance], scale: SceneScale) -> Result<()> {
    std::fs::write(path, corpus_to_json(instances, scale)?)?;
    Ok(())
}

/// Keeps every `fps / dst_fps`-th frame starting at frame 0.
pub fn subsample(instance: &MotionInstance, dst_fps: u32) -> Result<MotionInstance> {
    let src = instance.trajectory.fps;
    if dst_fps == 0 || !src.is_multiple_of(dst_fps) {
        return Err(Error::InvalidArgument(format!("cannot subsample {src} fps to {dst_fps} fps")));
    }
    let stride = (src / dst_fps) as usize;
    let mut trajectory = Trajectory {
        frames: instance.trajectory.frames.iter().step_by(stride).copied().collect(),
        fps: dst_fps,
    };
    trajectory.renumber();
    Ok(MotionInstance { trajectory, ..instance.clone() })
}

/// Seeded shuffle, then the first `n_train` go to train and the next
/// `n_test` to test.
pub fn split(instances: &[MotionInstance], seed: u64, n_train: usize, n_test: usize) -> Result<DatasetSplit> {
    if n_train + n_test > instances.len() {
        return Err(Error::InvalidArgument(format!(
            "need {} instances for a {n_train}/{n_test} split, have {}",
            n_train + n_test,
            instances.len()
        )));
    }
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| instances[i].clone()).collect::<Vec<_>>();
    Ok(DatasetSplit { train: pick(&order[..n_train]), test: pick(&order[n_train..n_train + n_test]) })
}
