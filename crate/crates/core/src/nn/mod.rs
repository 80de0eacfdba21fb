//! Minimal dense-network engine with exact reverse-mode gradients.
//!
//! Supports the layer set needed by the classification baseline and the
//! feature autoencoder: dense, batch normalization, GDN/IGDN, ReLU, PReLU
//! and sigmoid, plus weighted binary cross-entropy and L1 losses, SGD with
//! Nesterov momentum, a step learning-rate schedule and a binary
//! checkpoint container.

pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod optim;

pub use layers::{
    BatchNormLayer, DenseLayer, GdnDirection, GdnLayer, Layer, LayerStack, PReluLayer, ReluLayer,
    SigmoidLayer,
};
pub use loss::{l1_loss, weighted_bce_loss};
pub use optim::{DecayPoints, SgdOptimizer, StepLrSchedule};

/// Forward-pass mode. Train mode uses batch statistics and additive
/// quantization noise; eval mode uses running statistics and rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A trainable parameter tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub data: Vec<f64>,
    pub grad: Vec<f64>,
    shape: Vec<usize>,
}

impl Param {
    /// Zero-initialized parameter of the given shape.
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Param {
            data: vec![0.0; n],
            grad: vec![0.0; n],
            shape: shape.to_vec(),
        }
    }

    /// Parameter filled with a constant.
    pub fn constant(shape: &[usize], value: f64) -> Self {
        let mut p = Self::zeros(shape);
        p.data.fill(value);
        p
    }

    /// Parameter initialized from explicit values.
    pub fn from_values(shape: &[usize], values: Vec<f64>) -> Self {
        let n: usize = shape.iter().product();
        assert_eq!(n, values.len(), "parameter value count mismatch");
        Param {
            grad: vec![0.0; n],
            data: values,
            shape: shape.to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}
