#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Spectral EEG analysis for telling apart recordings made while watching 2D
//! and 3D video.
//!
//! The pipeline runs in two phases. Band selection averages the trials of each
//! channel, filters, estimates a Hann-windowed STFT power spectrum and compares
//! normalized band powers between conditions to elect dominant bands. Epoch
//! classification slices single trials into overlapping 4 s epochs, extracts
//! the dominant-band percentages per channel and trains PLSR and RBF-SVM
//! classifiers tuned by k-fold cross-validation, then ranks channels and
//! searches prefix combinations of the ranking.

pub mod error;
mod linalg;
mod rng;
pub mod model;
pub mod dsp;
pub mod synth;
pub mod bandsel;
pub mod features;
pub mod learn;
pub mod eval;

pub use error::{Error, Result};
