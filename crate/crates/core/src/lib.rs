//! Real-time translation between two-character symbol motions and story
//! text through a shared action-embedding layer.

pub mod action;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod motion;
pub mod neural;
pub mod pipelines;
pub mod remote;
pub mod session;

pub use error::{Error, Result};
