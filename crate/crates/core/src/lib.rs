//! Cross-modal adversarial patch toolkit.
//!
//! Synthesizes color-driven universal adversarial patches that attack
//! object detectors in both the visible and infrared modalities, and
//! evaluates the attacks across detectors, thresholds and ablations.
//!
//! The pieces, bottom up:
//!
//! - [`thermal`]: color-to-temperature physics and synthetic infrared
//!   rendering — the ground-truth oracle of the toy world.
//! - [`autodiff`]: small reverse-mode tape every differentiable path runs on.
//! - [`adapter`]: learned pixel-wise RGB-to-infrared mapping that lets
//!   infrared-branch gradients reach the RGB patch.
//! - [`compositor`]: differentiable patch placement under sampled physical
//!   transformations (rotation, scale, brightness, blur).
//! - [`losses`]: total-variation smoothness and detection-score suppression
//!   terms of the attack objective.
//! - [`detector`]: victim-detector boundary — trainable toy convolutional
//!   detectors plus an external subprocess plug-in path, behind a registry.
//! - [`data`]: paired visible/infrared dataset I/O, multi-scale clipping
//!   augmentation and the synthetic scene generator.
//! - [`trainer`]: the patch optimization loop over both modality branches.
//! - [`eval`]: attack success rate reports, threshold sweeps, transfer
//!   matrices, baselines and ablations.

pub mod adapter;
pub mod autodiff;
pub mod bbox;
pub mod compositor;
pub mod data;
pub mod detector;
pub mod error;
pub mod eval;
pub mod imageops;
pub mod losses;
pub mod optim;
pub mod plot;
pub mod thermal;
pub mod trainer;

pub use error::{Error, Result};
