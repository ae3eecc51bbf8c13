//! Recurrent sequence models, their training and persistence.

pub mod checkpoint;
pub mod head;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod optim;
pub mod teacher;
pub mod tensor;
pub mod train;

pub use checkpoint::{Checkpoint, TrainingMeta};
pub use head::FeedforwardHead;
pub use loss::{LossKind, Target};
pub use lstm::{HiddenState, RecurrentStack};
pub use model::{HeadConditioning, ModelConfig, ModelKind, ModelParams, Preset, SequenceModel};
pub use teacher::GeneratorRole;
pub use tensor::Tensor;
pub use train::{train, EpochStats, Sample, TrainConfig, TrainOutcome};
