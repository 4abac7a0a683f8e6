//! Minimal tensor/layer core for the GAN: strided and transposed
//! convolution, batch normalization, ReLU variants and RMSprop.
//!
//! Master weights live in `f32` (matching the on-disk model format exactly,
//! so save/load is bit-identical); every forward/backward computation runs
//! in `f64` so analytic gradients survive finite-difference verification.

mod conv;
mod layers;

pub use conv::{conv_bwd_data, conv_bwd_weight, conv_fwd, out_dim};
pub use layers::{
    leaky_relu, leaky_relu_bwd, relu, relu_bwd, BatchNorm2d, BnCtx, Conv2d, ConvCtx,
    ConvTranspose2d, Linear, LinearCtx,
};

use thiserror::Error;

/// (batch, channels, height, width) activation tensor.
pub type Tensor4 = ndarray::Array4<f64>;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("batch of {batch} is degenerate for train-mode batchnorm")]
    DegenerateBatch { batch: usize },
}

/// A trainable weight vector with its gradient and RMSprop accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub w: Vec<f32>,
    pub g: Vec<f64>,
    pub acc: Vec<f64>,
}

impl Param {
    pub fn new(w: Vec<f32>) -> Self {
        let n = w.len();
        Param { w, g: vec![0.0; n], acc: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.g.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Weights widened to the compute precision.
    pub fn lift(&self) -> Vec<f64> {
        self.w.iter().map(|&v| v as f64).collect()
    }

    pub fn max_abs(&self) -> f32 {
        self.w.iter().fold(0.0f32, |m, &v| m.max(v.abs()))
    }
}

/// One RMSprop update: acc <- decay*acc + (1-decay)*g^2,
/// w <- w - lr*g/sqrt(acc + eps).
pub fn rmsprop_step(p: &mut Param, lr: f64, decay: f64, eps: f64) {
    for i in 0..p.w.len() {
        let g = p.g[i];
        p.acc[i] = decay * p.acc[i] + (1.0 - decay) * g * g;
        let w = p.w[i] as f64 - lr * g / (p.acc[i] + eps).sqrt();
        p.w[i] = w as f32;
    }
}

/// Clamp every weight to [-c, c].
pub fn clip_param(p: &mut Param, c: f64) {
    let cf = c as f32;
    for w in &mut p.w {
        *w = w.clamp(-cf, cf);
    }
}
