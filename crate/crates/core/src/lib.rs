//! Hybrid image classifier: a LeNet-style convolutional feature extractor
//! pretrained by gradient descent, followed by an extreme learning machine
//! head whose input weights and biases are evolved by the sine-cosine
//! algorithm and whose output weights are solved in closed form.
//!
//! The crate also carries the evaluation apparatus (threshold sweeps,
//! ROC/PR curves, rank-sum tests, confidence intervals, timings) and a
//! benchmark test-bed for the optimizer.
//!
//! Data-parallel loops (agent fitness evaluation, feature extraction,
//! per-sample gradients) go through [`exec::Execution`]; with the default
//! `parallel` feature they run on rayon, otherwise sequentially. Results
//! are identical in both modes.

pub mod benchfns;
pub mod cnn;
pub mod dataset;
pub mod elm;
mod error;
pub mod evaluation;
pub mod exec;
pub mod numerics;
pub mod pipeline;
pub mod sca;
pub mod sweep;

pub use error::{Error, Result};
pub use numerics::{Matrix, RngStream};

/// Version tag written into every model and manifest file.
pub const FORMAT_VERSION: u32 = 1;
