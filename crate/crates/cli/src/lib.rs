//! Command-line tools and the session server built on `storyplay-core`.

pub mod commands;
pub mod config;
pub mod server;
