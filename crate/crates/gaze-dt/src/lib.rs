//! Gaze trajectory prediction with a return-conditioned causal transformer.
//!
//! The pipeline: synthetic (or ingested) video episodes with per-frame gaze,
//! foveal masking of each frame at the current gaze, a small convolutional
//! state encoder, and a decision-transformer-style sequence model that emits
//! continuous (x, y) fixations autoregressively. Baselines (behavioral
//! cloning, random fixations) and the pixel/angular evaluation metrics live
//! alongside.
//!
//! See the crate examples for runnable entry points per capability, or the
//! `gaze-dt` binary for the subcommand pipeline.

pub mod cli;
pub mod config;
pub mod error;
pub mod foveation;
pub mod metrics;
pub mod model;
pub mod params;
pub mod rollout;
pub mod synth;
pub mod tape;
pub mod train;
pub mod trajectory;

pub use error::{GazeError, Result};
