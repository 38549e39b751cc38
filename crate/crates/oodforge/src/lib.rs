//! Confidence-calibrated classifiers with a boundary-seeking GAN for
//! out-of-distribution detection.
//!
//! The crate trains fully-connected classifiers whose predictive
//! distribution is pushed toward uniform on out-of-distribution inputs,
//! optionally generating those inputs on the fly with a GAN whose generator
//! is steered to the low-density boundary of the in-distribution. On top of
//! the training side it ships the matching detection stack: max-softmax and
//! temperature/perturbation scoring, an added-class baseline, threshold
//! detectors, and the full ROC/PR/calibration metric suite.
//!
//! Everything runs at desk scale on synthetic 2D Gaussian mixtures and small
//! tabular data, with deterministic seeding end to end. Start with the
//! runnable programs under `examples/`, or the `oodforge` binary for
//! file-based pipelines.

pub mod autograd;
pub mod cli;
pub mod data;
pub mod detect;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod nets;
pub mod training;

pub use error::{Error, Result};
