//! Evaluation harness: recognition quality, weight concentration, text
//! diversity and per-tick latency.

mod latency;
mod metrics;
mod recognition;

pub use latency::{latency_bench, LatencyReport, LatencyStats};
pub use metrics::{cosine_distance, gini, mst_dispersion, DiversityReport, MstEdge, Summary};
pub use recognition::{
    eval_recognition, lexicon_weights, recognize_action, recognize_character, InstanceRecognition, RecognitionReport,
};
