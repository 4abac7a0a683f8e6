//! Layer types over the convolution primitives. Each layer owns its
//! parameters and exposes an explicit forward returning a context that the
//! matching backward consumes; backward accumulates into `Param::g`.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::conv::{conv_bwd_data, conv_bwd_weight, conv_fwd};
use super::{NeuralError, Param, Tensor4};

const INIT_STD: f64 = 0.02;

fn init_normal(rng: &mut impl Rng, n: usize, mean: f64, std: f64) -> Vec<f32> {
    let dist = Normal::new(mean, std).expect("valid std");
    (0..n).map(|_| dist.sample(rng) as f32).collect()
}

/// Strided 2-D cross-correlation, weight layout (co, ci, k, k), no bias.
#[derive(Clone)]
pub struct Conv2d {
    pub w: Param,
    pub ci: usize,
    pub co: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

pub struct ConvCtx {
    x: Tensor4,
}

impl Conv2d {
    pub fn new(ci: usize, co: usize, k: usize, stride: usize, pad: usize, rng: &mut impl Rng) -> Self {
        let w = Param::new(init_normal(rng, co * ci * k * k, 0.0, INIT_STD));
        Conv2d { w, ci, co, k, stride, pad }
    }

    fn w2(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.co, self.ci * self.k * self.k), self.w.lift())
            .expect("param sized at construction")
    }

    fn check_input(&self, x: &Tensor4) -> Result<(), NeuralError> {
        let (_, ci, h, w) = x.dim();
        if ci != self.ci {
            return Err(NeuralError::ShapeMismatch(format!(
                "conv expects {} input channels, got {ci}",
                self.ci
            )));
        }
        if h + 2 * self.pad < self.k || w + 2 * self.pad < self.k {
            return Err(NeuralError::ShapeMismatch(format!(
                "spatial input {h}x{w} smaller than kernel {}",
                self.k
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor4) -> Result<(Tensor4, ConvCtx), NeuralError> {
        self.check_input(x)?;
        let y = conv_fwd(x, &self.w2(), self.k, self.stride, self.pad);
        Ok((y, ConvCtx { x: x.clone() }))
    }

    /// Accumulates the weight gradient; returns the input gradient when asked.
    pub fn backward(&mut self, ctx: &ConvCtx, gy: &Tensor4, need_gx: bool) -> Option<Tensor4> {
        let gw = conv_bwd_weight(&ctx.x, gy, self.k, self.stride, self.pad);
        let gws = gw.as_slice().expect("contiguous gemm result");
        for (g, &d) in self.w.g.iter_mut().zip(gws) {
            *g += d;
        }
        if need_gx {
            let (_, _, h, w) = ctx.x.dim();
            Some(conv_bwd_data(gy, &self.w2(), self.k, self.stride, self.pad, (h, w)))
        } else {
            None
        }
    }
}

/// Fractional-strided convolution: the exact adjoint of a [`Conv2d`] with
/// the same hyperparameters. Weight layout (ci, co, k, k), no bias.
#[derive(Clone)]
pub struct ConvTranspose2d {
    pub w: Param,
    pub ci: usize,
    pub co: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvTranspose2d {
    pub fn new(ci: usize, co: usize, k: usize, stride: usize, pad: usize, rng: &mut impl Rng) -> Self {
        let w = Param::new(init_normal(rng, ci * co * k * k, 0.0, INIT_STD));
        ConvTranspose2d { w, ci, co, k, stride, pad }
    }

    /// Weights as the matrix of the conv this layer is adjoint to.
    fn w2(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.ci, self.co * self.k * self.k), self.w.lift())
            .expect("param sized at construction")
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h - 1) * self.stride + self.k - 2 * self.pad,
            (w - 1) * self.stride + self.k - 2 * self.pad,
        )
    }

    pub fn forward(&self, x: &Tensor4) -> Result<(Tensor4, ConvCtx), NeuralError> {
        let (_, ci, h, w) = x.dim();
        if ci != self.ci {
            return Err(NeuralError::ShapeMismatch(format!(
                "conv-transpose expects {} input channels, got {ci}",
                self.ci
            )));
        }
        let (oh, ow) = self.out_hw(h, w);
        let y = conv_bwd_data(x, &self.w2(), self.k, self.stride, self.pad, (oh, ow));
        Ok((y, ConvCtx { x: x.clone() }))
    }

    pub fn backward(&mut self, ctx: &ConvCtx, gy: &Tensor4, need_gx: bool) -> Option<Tensor4> {
        // Roles swap relative to conv: gy sits on the conv-input side.
        let gw = conv_bwd_weight(gy, &ctx.x, self.k, self.stride, self.pad);
        let gws = gw.as_slice().expect("contiguous gemm result");
        for (g, &d) in self.w.g.iter_mut().zip(gws) {
            *g += d;
        }
        if need_gx {
            Some(conv_fwd(gy, &self.w2(), self.k, self.stride, self.pad))
        } else {
            None
        }
    }
}

/// Fully connected layer y = x W^T, weight layout (out, in), no bias.
#[derive(Clone)]
pub struct Linear {
    pub w: Param,
    pub in_f: usize,
    pub out_f: usize,
}

pub struct LinearCtx {
    x: Array2<f64>,
}

impl Linear {
    pub fn new(in_f: usize, out_f: usize, rng: &mut impl Rng) -> Self {
        let w = Param::new(init_normal(rng, out_f * in_f, 0.0, INIT_STD));
        Linear { w, in_f, out_f }
    }

    fn w2(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.out_f, self.in_f), self.w.lift())
            .expect("param sized at construction")
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, LinearCtx), NeuralError> {
        if x.ncols() != self.in_f {
            return Err(NeuralError::ShapeMismatch(format!(
                "linear expects {} features, got {}",
                self.in_f,
                x.ncols()
            )));
        }
        let y = x.dot(&self.w2().t());
        Ok((y, LinearCtx { x: x.clone() }))
    }

    pub fn backward(&mut self, ctx: &LinearCtx, gy: &Array2<f64>, need_gx: bool) -> Option<Array2<f64>> {
        let gw = gy.t().dot(&ctx.x);
        let gws = gw.as_slice().expect("contiguous gemm result");
        for (g, &d) in self.w.g.iter_mut().zip(gws) {
            *g += d;
        }
        if need_gx {
            Some(gy.dot(&self.w2()))
        } else {
            None
        }
    }
}

/// Per-channel batch normalization with affine scale/shift and running
/// statistics for eval mode. Running stats are stored in f32 so a persisted
/// model reloads bit-identically.
#[derive(Clone)]
pub struct BatchNorm2d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub channels: usize,
    pub eps: f64,
    pub momentum: f64,
}

pub struct BnCtx {
    xhat: Tensor4,
    invstd: Vec<f64>,
}

impl BatchNorm2d {
    pub fn new(channels: usize, rng: &mut impl Rng) -> Self {
        BatchNorm2d {
            gamma: Param::new(init_normal(rng, channels, 1.0, INIT_STD)),
            beta: Param::new(vec![0.0; channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            channels,
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    fn check_channels(&self, x: &Tensor4) -> Result<(), NeuralError> {
        if x.dim().1 != self.channels {
            return Err(NeuralError::ShapeMismatch(format!(
                "batchnorm over {} channels, got {}",
                self.channels,
                x.dim().1
            )));
        }
        Ok(())
    }

    /// Normalize by batch statistics and update the running estimates.
    pub fn forward_train(&mut self, x: &Tensor4) -> Result<(Tensor4, BnCtx), NeuralError> {
        self.check_channels(x)?;
        let (b, c, h, w) = x.dim();
        if b < 2 {
            return Err(NeuralError::DegenerateBatch { batch: b });
        }
        let n = (b * h * w) as f64;
        let mut y = x.clone();
        let mut xhat = x.clone();
        let mut invstd = vec![0.0; c];
        for ci in 0..c {
            let lane = x.index_axis(Axis(1), ci);
            let mean = lane.sum() / n;
            let var = lane.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let istd = 1.0 / (var + self.eps).sqrt();
            invstd[ci] = istd;
            let gamma = self.gamma.w[ci] as f64;
            let beta = self.beta.w[ci] as f64;
            for (xh, yv) in xhat
                .index_axis_mut(Axis(1), ci)
                .iter_mut()
                .zip(y.index_axis_mut(Axis(1), ci).iter_mut())
            {
                let normalized = (*xh - mean) * istd;
                *xh = normalized;
                *yv = gamma * normalized + beta;
            }
            // Running variance uses the unbiased estimate.
            let unbiased = var * n / (n - 1.0);
            let m = self.momentum;
            self.running_mean[ci] = ((1.0 - m) * self.running_mean[ci] as f64 + m * mean) as f32;
            self.running_var[ci] = ((1.0 - m) * self.running_var[ci] as f64 + m * unbiased) as f32;
        }
        Ok((y, BnCtx { xhat, invstd }))
    }

    /// Normalize by the running statistics; works for any batch size.
    pub fn forward_eval(&self, x: &Tensor4) -> Result<Tensor4, NeuralError> {
        self.check_channels(x)?;
        let c = x.dim().1;
        let mut y = x.clone();
        for ci in 0..c {
            let mean = self.running_mean[ci] as f64;
            let istd = 1.0 / (self.running_var[ci] as f64 + self.eps).sqrt();
            let gamma = self.gamma.w[ci] as f64;
            let beta = self.beta.w[ci] as f64;
            for v in y.index_axis_mut(Axis(1), ci).iter_mut() {
                *v = gamma * (*v - mean) * istd + beta;
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, ctx: &BnCtx, gy: &Tensor4) -> Tensor4 {
        let (b, c, h, w) = gy.dim();
        let n = (b * h * w) as f64;
        let mut gx = gy.clone();
        for ci in 0..c {
            let xhat = ctx.xhat.index_axis(Axis(1), ci);
            let gyl = gy.index_axis(Axis(1), ci);
            let sum_gy: f64 = gyl.sum();
            let sum_gy_xhat: f64 = gyl.iter().zip(xhat.iter()).map(|(&g, &xh)| g * xh).sum();
            self.beta.g[ci] += sum_gy;
            self.gamma.g[ci] += sum_gy_xhat;
            let gamma = self.gamma.w[ci] as f64;
            let scale = gamma * ctx.invstd[ci] / n;
            for (gxv, (&g, &xh)) in gx
                .index_axis_mut(Axis(1), ci)
                .iter_mut()
                .zip(gyl.iter().zip(xhat.iter()))
            {
                *gxv = scale * (n * g - sum_gy - xh * sum_gy_xhat);
            }
        }
        gx
    }
}

pub fn relu(x: &Tensor4) -> Tensor4 {
    x.mapv(|v| v.max(0.0))
}

pub fn relu_bwd(x: &Tensor4, gy: &Tensor4) -> Tensor4 {
    let mut gx = gy.clone();
    gx.zip_mut_with(x, |g, &xv| {
        if xv <= 0.0 {
            *g = 0.0;
        }
    });
    gx
}

pub fn leaky_relu(x: &Tensor4, slope: f64) -> Tensor4 {
    x.mapv(|v| if v > 0.0 { v } else { slope * v })
}

pub fn leaky_relu_bwd(x: &Tensor4, gy: &Tensor4, slope: f64) -> Tensor4 {
    let mut gx = gy.clone();
    gx.zip_mut_with(x, |g, &xv| {
        if xv <= 0.0 {
            *g *= slope;
        }
    });
    gx
}
