//! Patient-independent seizure prediction from scalp EEG.
//!
//! The crate covers the full pipeline: EDF ingestion and annotation
//! parsing, windowing and labeling, MFCC feature maps, a small
//! reverse-mode autodiff engine with the two network architectures
//! built on it, training and evaluation loops, and post-hoc
//! interpretation (channel attribution and divergence maps).
//!
//! Everything numeric is generic over [`scalar::Scalar`], so the same
//! code runs in f64 (the default, used by the tests) or f32.

pub mod container;
pub mod dataset;
pub mod edf;
pub mod error;
pub mod fft;
pub mod ingest;
pub mod interpret;
pub mod mfcc;
pub mod models;
pub mod nn;
pub mod scalar;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default-precision tensor.
pub type Tensor64 = tensor::Tensor<f64>;
/// Single-precision tensor.
pub type Tensor32 = tensor::Tensor<f32>;
