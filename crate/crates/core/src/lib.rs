//! Joint transmission-recognition pipelines for multi-view cameras.
//!
//! This crate implements six device-edge transmission schemes for the
//! multi-label person classification task:
//!
//! - five deep JSCC schemes (`SingleUsers`, `JDecOma`, `JDecNoma`, `JEnc1`,
//!   `JEnc2`) that map intermediate feature vectors directly to channel
//!   symbols and send them over an AWGN channel, and
//! - a digital baseline (`Digital`) that quantizes a learned latent,
//!   entropy-codes it with an arithmetic coder, and assumes ideal
//!   capacity-achieving channel codes.
//!
//! The building blocks are organized by subsystem:
//!
//! - [`tensor`]: dense row-major `f64` arrays.
//! - [`rng`]: counter-based noise source (reproducible across runs).
//! - [`nn`]: dense/batch-norm/GDN/PReLU layers with exact reverse-mode
//!   gradients, losses, SGD with Nesterov momentum, checkpoints.
//! - [`channel`]: SNR/capacity math, power normalization, AWGN, OMA/NOMA
//!   composition.
//! - [`entropy`]: learned Gaussian-mixture entropy model, quantization,
//!   frequency tables and a byte-oriented range coder.
//! - [`data`]: synthetic correlated multi-view datasets, feature-file I/O,
//!   camera annotation tables and the co-occurrence correlation metric.
//! - [`schemes`]: assembled pipelines and the multi-step training drivers.
//! - [`eval`]: balanced accuracy, quartile summaries, the optimal bandwidth
//!   combination bound, per-cell evaluation and grid sweeps.

pub mod channel;
pub mod data;
pub mod entropy;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod nn;
pub mod rng;
pub mod schemes;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::NoiseSource;
pub use tensor::Tensor;
