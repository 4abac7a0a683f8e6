//! DCGAN generator/critic pair trained with the weight-clipped WGAN
//! algorithm, plus model persistence.
//!
//! Generator: latent 32 → linear to 256x4x4 → three transposed convs
//! (k4, s2, p1) to 128x8x8 → 64x16x16 → 10x32x32, batchnorm + ReLU on every
//! hidden block and a bare ReLU on the output (no batchnorm there, which
//! would destroy the near-one-hot logits). Critic mirrors it with strided
//! convs and LeakyReLU(0.2), batchnorm on the inner two blocks only, and a
//! bias-free linear head to one scalar. No layer anywhere carries a bias.

use std::io::{Read as _, Write as _};
use std::path::Path;

use ndarray::{Array2, Array3, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{self, TileGrid, ENCODED_SIZE, NUM_TILES};
use crate::neural::{
    clip_param, leaky_relu, leaky_relu_bwd, relu, relu_bwd, rmsprop_step, BatchNorm2d, BnCtx,
    Conv2d, ConvCtx, ConvTranspose2d, Linear, LinearCtx, NeuralError, Param, Tensor4,
};

pub const LATENT_DIM: usize = 32;
const PROJ_CHANNELS: usize = 256;
const PROJ_HW: usize = 4;
const PROJ_LEN: usize = PROJ_CHANNELS * PROJ_HW * PROJ_HW; // 4096
const LEAK: f64 = 0.2;
const ARCHITECTURE: &str = "dcgan32.z32-fc4096-ct256.128.64.10";

#[derive(Debug, Error)]
pub enum GanError {
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("non-finite loss at iteration {iteration} (w={wasserstein}, g={generator_loss})")]
    NonFiniteLoss {
        iteration: usize,
        wasserstein: f64,
        generator_loss: f64,
    },
    #[error("model file format mismatch: {0}")]
    FormatVersionMismatch(String),
    #[error("model file checksum mismatch")]
    ChecksumMismatch,
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Latent-to-level generator network.
#[derive(Clone)]
pub struct Generator {
    pub fc: Linear,
    pub bn0: BatchNorm2d,
    pub ct1: ConvTranspose2d,
    pub bn1: BatchNorm2d,
    pub ct2: ConvTranspose2d,
    pub bn2: BatchNorm2d,
    pub ct3: ConvTranspose2d,
    /// Seed the weights were initialized from.
    pub seed: u64,
    /// Generator updates applied so far.
    pub iterations: u64,
}

pub struct GenCtx {
    lin: LinearCtx,
    bn0: BnCtx,
    a0: Tensor4,
    ct1: ConvCtx,
    bn1: BnCtx,
    a1: Tensor4,
    ct2: ConvCtx,
    bn2: BnCtx,
    a2: Tensor4,
    ct3: ConvCtx,
    a3: Tensor4,
}

impl Generator {
    pub fn build(seed: u64) -> Generator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Generator {
            fc: Linear::new(LATENT_DIM, PROJ_LEN, &mut rng),
            bn0: BatchNorm2d::new(PROJ_CHANNELS, &mut rng),
            ct1: ConvTranspose2d::new(256, 128, 4, 2, 1, &mut rng),
            bn1: BatchNorm2d::new(128, &mut rng),
            ct2: ConvTranspose2d::new(128, 64, 4, 2, 1, &mut rng),
            bn2: BatchNorm2d::new(64, &mut rng),
            ct3: ConvTranspose2d::new(64, NUM_TILES, 4, 2, 1, &mut rng),
            seed,
            iterations: 0,
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.fc.w,
            &mut self.bn0.gamma,
            &mut self.bn0.beta,
            &mut self.ct1.w,
            &mut self.bn1.gamma,
            &mut self.bn1.beta,
            &mut self.ct2.w,
            &mut self.bn2.gamma,
            &mut self.bn2.beta,
            &mut self.ct3.w,
        ]
    }

    /// Training-mode forward: batch statistics, running stats updated.
    pub fn forward_train(&mut self, z: &Array2<f64>) -> Result<(Tensor4, GenCtx), NeuralError> {
        let b = z.nrows();
        let (proj, lin) = self.fc.forward(z)?;
        let x = proj
            .into_shape_with_order((b, PROJ_CHANNELS, PROJ_HW, PROJ_HW))
            .expect("projection reshape");
        let (a0, bn0) = self.bn0.forward_train(&x)?;
        let (h1, ct1) = self.ct1.forward(&relu(&a0))?;
        let (a1, bn1) = self.bn1.forward_train(&h1)?;
        let (h2, ct2) = self.ct2.forward(&relu(&a1))?;
        let (a2, bn2) = self.bn2.forward_train(&h2)?;
        let (a3, ct3) = self.ct3.forward(&relu(&a2))?;
        let out = relu(&a3);
        Ok((out, GenCtx { lin, bn0, a0, ct1, bn1, a1, ct2, bn2, a2, ct3, a3 }))
    }

    /// Inference forward: batchnorm uses running statistics.
    pub fn forward_eval(&self, z: &Array2<f64>) -> Result<Tensor4, NeuralError> {
        let b = z.nrows();
        let (proj, _) = self.fc.forward(z)?;
        let x = proj
            .into_shape_with_order((b, PROJ_CHANNELS, PROJ_HW, PROJ_HW))
            .expect("projection reshape");
        let a0 = self.bn0.forward_eval(&x)?;
        let (h1, _) = self.ct1.forward(&relu(&a0))?;
        let a1 = self.bn1.forward_eval(&h1)?;
        let (h2, _) = self.ct2.forward(&relu(&a1))?;
        let a2 = self.bn2.forward_eval(&h2)?;
        let (a3, _) = self.ct3.forward(&relu(&a2))?;
        Ok(relu(&a3))
    }

    pub fn backward(&mut self, ctx: &GenCtx, gy: &Tensor4) {
        let g = relu_bwd(&ctx.a3, gy);
        let g = self.ct3.backward(&ctx.ct3, &g, true).expect("gx requested");
        let g = relu_bwd(&ctx.a2, &g);
        let g = self.bn2.backward(&ctx.bn2, &g);
        let g = self.ct2.backward(&ctx.ct2, &g, true).expect("gx requested");
        let g = relu_bwd(&ctx.a1, &g);
        let g = self.bn1.backward(&ctx.bn1, &g);
        let g = self.ct1.backward(&ctx.ct1, &g, true).expect("gx requested");
        let g = relu_bwd(&ctx.a0, &g);
        let g = self.bn0.backward(&ctx.bn0, &g);
        let b = g.dim().0;
        let g2 = g.into_shape_with_order((b, PROJ_LEN)).expect("projection reshape");
        self.fc.backward(&ctx.lin, &g2, false);
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Decode one latent point to a level window (inference mode).
    pub fn generate(&self, z: &[f64]) -> Result<TileGrid, GanError> {
        assert_eq!(z.len(), LATENT_DIM);
        let zs = Array2::from_shape_vec((1, LATENT_DIM), z.to_vec()).unwrap();
        let out = self.forward_eval(&zs)?;
        let grid = corpus::decode_window(out.index_axis(Axis(0), 0))
            .expect("finite generator output decodes");
        Ok(grid)
    }
}

/// WGAN critic: scores samples, higher = more real.
#[derive(Clone)]
pub struct Critic {
    pub c1: Conv2d,
    pub c2: Conv2d,
    pub bn2: BatchNorm2d,
    pub c3: Conv2d,
    pub bn3: BatchNorm2d,
    pub fc: Linear,
    /// Weight-clip bound applied after every update.
    pub clip: f64,
}

pub struct CriticCtx {
    c1: ConvCtx,
    a1: Tensor4,
    c2: ConvCtx,
    bn2: BnCtx,
    a2: Tensor4,
    c3: ConvCtx,
    bn3: BnCtx,
    a3: Tensor4,
    lin: LinearCtx,
}

impl Critic {
    pub fn build(seed: u64) -> Critic {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Critic {
            c1: Conv2d::new(NUM_TILES, 64, 4, 2, 1, &mut rng),
            c2: Conv2d::new(64, 128, 4, 2, 1, &mut rng),
            bn2: BatchNorm2d::new(128, &mut rng),
            c3: Conv2d::new(128, 256, 4, 2, 1, &mut rng),
            bn3: BatchNorm2d::new(256, &mut rng),
            fc: Linear::new(PROJ_LEN, 1, &mut rng),
            clip: 0.01,
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.c1.w,
            &mut self.c2.w,
            &mut self.bn2.gamma,
            &mut self.bn2.beta,
            &mut self.c3.w,
            &mut self.bn3.gamma,
            &mut self.bn3.beta,
            &mut self.fc.w,
        ]
    }

    /// Largest weight magnitude over every trainable parameter.
    pub fn max_abs_weight(&mut self) -> f32 {
        self.params_mut().iter().map(|p| p.max_abs()).fold(0.0, f32::max)
    }

    /// Training-mode forward; returns one score per batch row.
    pub fn forward_train(&mut self, x: &Tensor4) -> Result<(Array2<f64>, CriticCtx), NeuralError> {
        let (h1, c1) = self.c1.forward(x)?;
        let a1 = h1;
        let (h2, c2) = self.c2.forward(&leaky_relu(&a1, LEAK))?;
        let (a2, bn2) = self.bn2.forward_train(&h2)?;
        let (h3, c3) = self.c3.forward(&leaky_relu(&a2, LEAK))?;
        let (a3, bn3) = self.bn3.forward_train(&h3)?;
        let b = a3.dim().0;
        let flat = leaky_relu(&a3, LEAK)
            .into_shape_with_order((b, PROJ_LEN))
            .expect("head reshape");
        let (score, lin) = self.fc.forward(&flat)?;
        Ok((score, CriticCtx { c1, a1, c2, bn2, a2, c3, bn3, a3, lin }))
    }

    /// Backprop from per-sample score gradients; optionally returns the
    /// input gradient (needed when training the generator through us).
    pub fn backward(
        &mut self,
        ctx: &CriticCtx,
        gscore: &Array2<f64>,
        need_gx: bool,
    ) -> Option<Tensor4> {
        let g = self.fc.backward(&ctx.lin, gscore, true).expect("gx requested");
        let b = g.nrows();
        let g = g.into_shape_with_order((b, PROJ_CHANNELS, PROJ_HW, PROJ_HW)).expect("head reshape");
        let g = leaky_relu_bwd(&ctx.a3, &g, LEAK);
        let g = self.bn3.backward(&ctx.bn3, &g);
        let g = self.c3.backward(&ctx.c3, &g, true).expect("gx requested");
        let g = leaky_relu_bwd(&ctx.a2, &g, LEAK);
        let g = self.bn2.backward(&ctx.bn2, &g);
        let g = self.c2.backward(&ctx.c2, &g, true).expect("gx requested");
        let g = leaky_relu_bwd(&ctx.a1, &g, LEAK);
        self.c1.backward(&ctx.c1, &g, need_gx)
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    /// Generator updates; each is preceded by `critic_steps` critic updates.
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub critic_steps: usize,
    pub clip: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 5000,
            batch_size: 32,
            lr: 0.00005,
            critic_steps: 5,
            clip: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IterationLog {
    pub iteration: usize,
    /// mean D(real) - mean D(fake) from the final critic step.
    pub wasserstein: f64,
    pub critic_loss: f64,
    pub generator_loss: f64,
}

const RMSPROP_DECAY: f64 = 0.99;
const RMSPROP_EPS: f64 = 1e-8;

/// Alternating WGAN optimization, stepped one generator update at a time.
pub struct WganTrainer {
    pub generator: Generator,
    pub critic: Critic,
    windows: Vec<Array3<f32>>,
    cfg: TrainConfig,
    rng: ChaCha8Rng,
    iteration: usize,
}

impl WganTrainer {
    pub fn new(windows: Vec<Array3<f32>>, cfg: TrainConfig) -> Result<WganTrainer, GanError> {
        if windows.is_empty() {
            return Err(GanError::EmptyDataset);
        }
        let mut critic = Critic::build(cfg.seed.wrapping_add(1));
        critic.clip = cfg.clip;
        Ok(WganTrainer {
            generator: Generator::build(cfg.seed),
            critic,
            windows,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2)),
            iteration: 0,
        })
    }

    fn sample_latents(&mut self, b: usize) -> Array2<f64> {
        Array2::from_shape_fn((b, LATENT_DIM), |_| self.rng.sample(StandardNormal))
    }

    /// Batch sampled uniformly with replacement, lifted to f64.
    fn sample_real(&mut self, b: usize) -> Tensor4 {
        let mut batch = Tensor4::zeros((b, NUM_TILES, ENCODED_SIZE, ENCODED_SIZE));
        for i in 0..b {
            let w = &self.windows[self.rng.gen_range(0..self.windows.len())];
            batch
                .index_axis_mut(Axis(0), i)
                .zip_mut_with(w, |d, &s| *d = s as f64);
        }
        batch
    }

    /// One generator update preceded by cfg.critic_steps critic updates.
    pub fn step(&mut self) -> Result<IterationLog, GanError> {
        let b = self.cfg.batch_size;
        let (lr, decay, eps) = (self.cfg.lr, RMSPROP_DECAY, RMSPROP_EPS);
        let mut wasserstein = 0.0;
        for _ in 0..self.cfg.critic_steps {
            let real = self.sample_real(b);
            let z = self.sample_latents(b);
            // Generator stays in training mode here so its running stats
            // see the same distribution it is optimized under.
            let (fake, _) = self.generator.forward_train(&z)?;
            self.critic.zero_grad();
            let (s_real, ctx_real) = self.critic.forward_train(&real)?;
            let (s_fake, ctx_fake) = self.critic.forward_train(&fake)?;
            // Maximize mean(real) - mean(fake).
            let g_real = Array2::from_elem((b, 1), -1.0 / b as f64);
            let g_fake = Array2::from_elem((b, 1), 1.0 / b as f64);
            self.critic.backward(&ctx_real, &g_real, false);
            self.critic.backward(&ctx_fake, &g_fake, false);
            let clip = self.critic.clip;
            for p in self.critic.params_mut() {
                rmsprop_step(p, lr, decay, eps);
                clip_param(p, clip);
            }
            wasserstein = (s_real.sum() - s_fake.sum()) / b as f64;
        }
        let critic_loss = -wasserstein;

        let z = self.sample_latents(b);
        self.generator.zero_grad();
        self.critic.zero_grad();
        let (fake, gctx) = self.generator.forward_train(&z)?;
        let (s_fake, cctx) = self.critic.forward_train(&fake)?;
        // Maximize mean D(G(z)).
        let g_fake = Array2::from_elem((b, 1), -1.0 / b as f64);
        let gx = self.critic.backward(&cctx, &g_fake, true).expect("gx requested");
        self.generator.backward(&gctx, &gx);
        for p in self.generator.params_mut() {
            rmsprop_step(p, lr, decay, eps);
        }
        let generator_loss = -s_fake.sum() / b as f64;

        self.iteration += 1;
        self.generator.iterations += 1;
        if !wasserstein.is_finite() || !generator_loss.is_finite() {
            return Err(GanError::NonFiniteLoss {
                iteration: self.iteration,
                wasserstein,
                generator_loss,
            });
        }
        Ok(IterationLog {
            iteration: self.iteration,
            wasserstein,
            critic_loss,
            generator_loss,
        })
    }
}

/// Train a generator from scratch; `on_iter` sees every iteration's log.
pub fn wgan_train(
    windows: Vec<Array3<f32>>,
    cfg: TrainConfig,
    mut on_iter: impl FnMut(&IterationLog),
) -> Result<Generator, GanError> {
    let mut t = WganTrainer::new(windows, cfg)?;
    for _ in 0..cfg.iterations {
        let log = t.step()?;
        on_iter(&log);
    }
    Ok(t.generator)
}

pub fn write_training_log(path: &Path, logs: &[IterationLog]) -> Result<(), std::io::Error> {
    let mut out = String::from("iteration,wasserstein_estimate,critic_loss,generator_loss\n");
    for l in logs {
        out.push_str(&format!(
            "{},{},{},{}\n",
            l.iteration, l.wasserstein, l.critic_loss, l.generator_loss
        ));
    }
    std::fs::write(path, out)
}

// ---- persistence ----------------------------------------------------------

const MAGIC: &[u8; 4] = b"LGM1";

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    architecture: String,
    latent_dim: usize,
    seed: u64,
    iterations: u64,
    /// Tensor name and element count, in blob order.
    tensors: Vec<(String, usize)>,
    blob_len: usize,
    sha256: String,
}

/// Persisted state in blob order: weights plus batchnorm running stats.
fn tensor_views(g: &Generator) -> Vec<(&'static str, &[f32])> {
    vec![
        ("fc.w", &g.fc.w.w),
        ("bn0.gamma", &g.bn0.gamma.w),
        ("bn0.beta", &g.bn0.beta.w),
        ("bn0.running_mean", &g.bn0.running_mean),
        ("bn0.running_var", &g.bn0.running_var),
        ("ct1.w", &g.ct1.w.w),
        ("bn1.gamma", &g.bn1.gamma.w),
        ("bn1.beta", &g.bn1.beta.w),
        ("bn1.running_mean", &g.bn1.running_mean),
        ("bn1.running_var", &g.bn1.running_var),
        ("ct2.w", &g.ct2.w.w),
        ("bn2.gamma", &g.bn2.gamma.w),
        ("bn2.beta", &g.bn2.beta.w),
        ("bn2.running_mean", &g.bn2.running_mean),
        ("bn2.running_var", &g.bn2.running_var),
        ("ct3.w", &g.ct3.w.w),
    ]
}

fn tensor_slots(g: &mut Generator) -> Vec<&mut [f32]> {
    vec![
        &mut g.fc.w.w,
        &mut g.bn0.gamma.w,
        &mut g.bn0.beta.w,
        &mut g.bn0.running_mean,
        &mut g.bn0.running_var,
        &mut g.ct1.w.w,
        &mut g.bn1.gamma.w,
        &mut g.bn1.beta.w,
        &mut g.bn1.running_mean,
        &mut g.bn1.running_var,
        &mut g.ct2.w.w,
        &mut g.bn2.gamma.w,
        &mut g.bn2.beta.w,
        &mut g.bn2.running_mean,
        &mut g.bn2.running_var,
        &mut g.ct3.w.w,
    ]
}

pub fn save_model(g: &Generator, path: &Path) -> Result<(), GanError> {
    let views = tensor_views(g);
    let mut blob = Vec::new();
    for (_, t) in &views {
        for v in *t {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sha = hex(&Sha256::digest(&blob));
    let manifest = Manifest {
        format_version: 1,
        architecture: ARCHITECTURE.into(),
        latent_dim: LATENT_DIM,
        seed: g.seed,
        iterations: g.iterations,
        tensors: views.iter().map(|(n, t)| (n.to_string(), t.len())).collect(),
        blob_len: blob.len(),
        sha256: sha,
    };
    let mjson = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut f = std::fs::File::create(path)?;
    f.write_all(MAGIC)?;
    f.write_all(&(mjson.len() as u64).to_le_bytes())?;
    f.write_all(&mjson)?;
    f.write_all(&blob)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Generator, GanError> {
    let mut f = std::fs::File::open(path)?;
    let mut head = [0u8; 12];
    f.read_exact(&mut head)
        .map_err(|_| GanError::FormatVersionMismatch("file shorter than header".into()))?;
    if &head[..4] != MAGIC {
        return Err(GanError::FormatVersionMismatch("bad magic".into()));
    }
    let mlen = u64::from_le_bytes(head[4..].try_into().unwrap()) as usize;
    if mlen > 1 << 20 {
        return Err(GanError::FormatVersionMismatch("implausible manifest length".into()));
    }
    let mut mjson = vec![0u8; mlen];
    f.read_exact(&mut mjson)
        .map_err(|_| GanError::FormatVersionMismatch("truncated manifest".into()))?;
    let manifest: Manifest = serde_json::from_slice(&mjson)
        .map_err(|e| GanError::FormatVersionMismatch(format!("unreadable manifest: {e}")))?;
    if manifest.format_version != 1 {
        return Err(GanError::FormatVersionMismatch(format!(
            "format_version {}",
            manifest.format_version
        )));
    }
    if manifest.architecture != ARCHITECTURE || manifest.latent_dim != LATENT_DIM {
        return Err(GanError::FormatVersionMismatch(format!(
            "architecture {} latent_dim {}",
            manifest.architecture, manifest.latent_dim
        )));
    }
    let mut blob = Vec::new();
    f.read_to_end(&mut blob)?;
    if blob.len() != manifest.blob_len || hex(&Sha256::digest(&blob)) != manifest.sha256 {
        return Err(GanError::ChecksumMismatch);
    }
    let mut g = Generator::build(manifest.seed);
    g.iterations = manifest.iterations;
    let slots = tensor_slots(&mut g);
    if manifest.tensors.len() != slots.len()
        || manifest
            .tensors
            .iter()
            .zip(slots.iter())
            .any(|((_, n), s)| *n != s.len())
    {
        return Err(GanError::ChecksumMismatch);
    }
    let mut off = 0;
    for slot in slots {
        for v in slot.iter_mut() {
            *v = f32::from_le_bytes(blob[off..off + 4].try_into().unwrap());
            off += 4;
        }
    }
    Ok(g)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    fn tiny_windows(n: usize) -> Vec<Array3<f32>> {
        // Synthetic "levels": floor of tile 0, air of tile 2.
        let mut grid = crate::corpus::TileGrid::empty(14, crate::corpus::WINDOW_WIDTH);
        for c in 0..grid.width() {
            grid.set(13, c, 0);
        }
        vec![crate::corpus::encode_window(&grid); n]
    }

    #[test]
    fn generator_output_shape_and_range() {
        let g = Generator::build(7);
        let z = Array2::zeros((1, LATENT_DIM));
        let out = g.forward_eval(&z).unwrap();
        assert_eq!(out.dim(), (1, NUM_TILES, ENCODED_SIZE, ENCODED_SIZE));
        assert!(out.iter().all(|&v| v >= 0.0), "ReLU output is nonnegative");
        let grid = g.generate(&vec![0.0; LATENT_DIM]).unwrap();
        assert_eq!((grid.height(), grid.width()), (14, 28));
    }

    #[test]
    fn same_seed_same_weights() {
        let a = Generator::build(3);
        let b = Generator::build(3);
        assert_eq!(a.fc.w.w, b.fc.w.w);
        assert_eq!(a.ct2.w.w, b.ct2.w.w);
        let z = Array2::from_shape_fn((2, LATENT_DIM), |(i, j)| (i + j) as f64 * 0.1);
        assert_eq!(a.forward_eval(&z).unwrap(), b.forward_eval(&z).unwrap());
    }

    #[test]
    fn critic_scores_batches() {
        let mut c = Critic::build(11);
        let x = Tensor4::from_shape_fn((3, NUM_TILES, 32, 32), |(b, ch, i, j)| {
            ((b + ch + i + j) % 5) as f64 * 0.2
        });
        let (s, _) = c.forward_train(&x).unwrap();
        assert_eq!(s.dim(), (3, 1));
        assert!(s.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn critic_gradcheck_full_network() {
        // Finite differences through the whole critic, batch 2. The f32
        // parameter store limits attainable accuracy; 1e-2 relative is the
        // contract here.
        let mut c = Critic::build(5);
        let x = Tensor4::from_shape_fn((2, NUM_TILES, 32, 32), |(b, ch, i, j)| {
            0.3 * ((b * 7 + ch * 3 + i * 5 + j) % 11) as f64 / 11.0
        });
        let loss = |c: &mut Critic, x: &Tensor4| -> f64 {
            let (s, _) = c.forward_train(x).unwrap();
            s.sum()
        };
        c.zero_grad();
        let (s, ctx) = c.forward_train(&x).unwrap();
        let _ = s;
        let gs = Array2::from_elem((2, 1), 1.0);
        let gx = c.backward(&ctx, &gs, true).unwrap();

        // Spot-check a few coordinates of every parameter tensor.
        for pi in 0..c.params_mut().len() {
            let len = c.params_mut()[pi].len();
            for &ci in &[0usize, len / 3, len - 1] {
                let analytic = c.params_mut()[pi].g[ci];
                let orig = c.params_mut()[pi].w[ci];
                let eps = 1e-3f32;
                c.params_mut()[pi].w[ci] = orig + eps;
                let hi = (c.params_mut()[pi].w[ci] - orig) as f64;
                let fp = loss(&mut c, &x);
                c.params_mut()[pi].w[ci] = orig - eps;
                let lo = (orig - c.params_mut()[pi].w[ci]) as f64;
                let fm = loss(&mut c, &x);
                c.params_mut()[pi].w[ci] = orig;
                let numeric = (fp - fm) / (hi + lo);
                let denom = analytic.abs().max(numeric.abs()).max(1.0);
                assert!(
                    ((analytic - numeric) / denom).abs() < 1e-2,
                    "param {pi}[{ci}]: analytic {analytic}, numeric {numeric}"
                );
            }
        }
        // And of the input gradient.
        let mut x2 = x.clone();
        for &(b, ch, i, j) in &[(0, 0, 0, 0), (1, 5, 16, 20), (0, 9, 31, 31)] {
            let eps = 1e-4;
            let orig = x2[(b, ch, i, j)];
            x2[(b, ch, i, j)] = orig + eps;
            let fp = loss(&mut c, &x2);
            x2[(b, ch, i, j)] = orig - eps;
            let fm = loss(&mut c, &x2);
            x2[(b, ch, i, j)] = orig;
            let numeric = (fp - fm) / (2.0 * eps);
            let analytic = gx[(b, ch, i, j)];
            let denom = analytic.abs().max(numeric.abs()).max(1.0);
            assert!(
                ((analytic - numeric) / denom).abs() < 1e-2,
                "input ({b},{ch},{i},{j}): analytic {analytic}, numeric {numeric}"
            );
        }
    }

    #[test]
    fn zero_iterations_returns_initial_generator() {
        let cfg = TrainConfig { iterations: 0, seed: 9, ..TrainConfig::default() };
        let trained = wgan_train(tiny_windows(4), cfg, |_| {}).unwrap();
        let fresh = Generator::build(9);
        assert_eq!(trained.fc.w.w, fresh.fc.w.w);
        assert_eq!(trained.bn1.running_mean, fresh.bn1.running_mean);
        assert_eq!(trained.iterations, 0);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let cfg = TrainConfig::default();
        assert!(matches!(
            WganTrainer::new(Vec::new(), cfg),
            Err(GanError::EmptyDataset)
        ));
    }

    #[test]
    fn critic_weights_clipped_after_every_step() {
        let cfg = TrainConfig { iterations: 3, batch_size: 8, seed: 1, ..TrainConfig::default() };
        let mut t = WganTrainer::new(tiny_windows(8), cfg).unwrap();
        for _ in 0..3 {
            let log = t.step().unwrap();
            assert!(log.wasserstein.is_finite());
            assert!(t.critic.max_abs_weight() <= 0.01 + f32::EPSILON);
        }
        assert_eq!(t.generator.iterations, 3);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig { iterations: 2, batch_size: 8, seed: 4, ..TrainConfig::default() };
        let mut logs_a = Vec::new();
        let a = wgan_train(tiny_windows(8), cfg, |l| logs_a.push(l.wasserstein)).unwrap();
        let mut logs_b = Vec::new();
        let b = wgan_train(tiny_windows(8), cfg, |l| logs_b.push(l.wasserstein)).unwrap();
        assert_eq!(logs_a, logs_b);
        assert_eq!(a.fc.w.w, b.fc.w.w);
        assert_eq!(a.bn2.running_var, b.bn2.running_var);
    }

    #[test]
    fn save_load_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.lgm");
        let cfg = TrainConfig { iterations: 2, batch_size: 8, seed: 6, ..TrainConfig::default() };
        let g = wgan_train(tiny_windows(8), cfg, |_| {}).unwrap();
        save_model(&g, &path).unwrap();
        let g2 = load_model(&path).unwrap();
        assert_eq!(g2.iterations, 2);
        assert_eq!(g2.seed, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let z: Array1<f64> =
                Array1::from_shape_fn(LATENT_DIM, |_| rng.sample(StandardNormal));
            let zb = z.clone().into_shape_with_order((1, LATENT_DIM)).unwrap();
            let a = g.forward_eval(&zb).unwrap();
            let b = g2.forward_eval(&zb).unwrap();
            assert_eq!(a, b, "outputs must match bit for bit");
        }
    }

    #[test]
    fn truncated_or_corrupt_files_error_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.lgm");
        let g = Generator::build(2);
        save_model(&g, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let cut_manifest = dir.path().join("cut1.lgm");
        std::fs::write(&cut_manifest, &bytes[..40]).unwrap();
        assert!(matches!(
            load_model(&cut_manifest),
            Err(GanError::FormatVersionMismatch(_))
        ));

        let cut_blob = dir.path().join("cut2.lgm");
        std::fs::write(&cut_blob, &bytes[..bytes.len() - 100]).unwrap();
        assert!(matches!(load_model(&cut_blob), Err(GanError::ChecksumMismatch)));

        let mut flipped = bytes.clone();
        let last = flipped.len() - 1;
        flipped[last] ^= 0xff;
        let bad = dir.path().join("bad.lgm");
        std::fs::write(&bad, &flipped).unwrap();
        assert!(matches!(load_model(&bad), Err(GanError::ChecksumMismatch)));

        assert!(matches!(
            load_model(&dir.path().join("missing.lgm")),
            Err(GanError::Io(_))
        ));
    }
}
