//! Infant-cry detection in noisy environments.
//!
//! The crate covers the full stack: WAV ingestion and canonicalization
//! ([`audio`]), log-mel feature extraction ([`features`]), SNR-controlled
//! waveform and spectrogram augmentation ([`augment`]), a small
//! double-precision neural-network kernel with hand-written reverse-mode
//! gradients ([`nn`]), the detector model itself — a multi-scale
//! blueprint-separable convolutional encoder with spatial and channel
//! attention plus a time-frequency recurrent denoiser ([`model`]) — and a
//! cross-validated training/evaluation pipeline with a streaming detector
//! ([`pipeline`]).
//!
//! The `crydetect` binary exposes the pipeline as CLI subcommands; see the
//! repository README for usage.

pub mod audio;
pub mod augment;
pub mod config;
pub mod error;
pub mod features;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
