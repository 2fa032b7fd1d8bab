//! Denoiser training: minimize `E‖B(y) - x‖²` over random patches with Adam.
//!
//! The loss depends on the network through `∇g(y)`, so each step
//! differentiates a gradient (double backpropagation).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{NetworkArchitecture, PotentialNetwork};
use super::{ScoreDenoiserModel, TrainingRecord, PIXEL_FLOOR};
use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::geometry::PotentialKind;
use crate::noise::sample_geometry_noise_with;

/// A grayscale training image with pixels in `[PIXEL_FLOOR, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub architecture: NetworkArchitecture,
    pub geometry: PotentialKind,
    pub patch_size: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    /// `1/γ` is drawn uniformly from this range; `1/γ = 0` means a clean input.
    pub inv_gamma_range: (f64, f64),
    /// Draw fresh patches and noise every step; when false one batch is reused.
    pub resample_noise: bool,
    /// Initial scale of the last layer.
    pub tail_gain: f64,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: NetworkArchitecture::default(),
            geometry: PotentialKind::Burg,
            patch_size: 32,
            batch_size: 8,
            steps: 2000,
            learning_rate: 1e-4,
            inv_gamma_range: (0.0, 0.1),
            resample_noise: true,
            tail_gain: 0.1,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        let m = self.architecture.size_multiple();
        if self.patch_size == 0 || self.patch_size % m != 0 {
            return Err(Error::config(format!(
                "patch size {} must be a positive multiple of {m}",
                self.patch_size
            )));
        }
        if self.batch_size == 0 || self.steps == 0 {
            return Err(Error::config("batch size and step count must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        let (lo, hi) = self.inv_gamma_range;
        if !(lo >= 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::config(format!("1/gamma range [{lo}, {hi}] must satisfy 0 <= lo <= hi < 1")));
        }
        if !(self.tail_gain >= 0.0 && self.tail_gain.is_finite()) {
            return Err(Error::config("tail gain must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Learning rate at `step`, halved at 25%, 50% and 75% of the run.
    pub fn learning_rate_at(&self, step: usize) -> f64 {
        let crossed = [1, 2, 3].iter().filter(|q| step * 4 >= *q * self.steps).count();
        self.learning_rate / f64::powi(2.0, crossed as i32)
    }
}

struct Batch {
    clean: Tensor,
    noisy: Tensor,
    inv_gamma: Tensor,
}

fn draw_batch(
    images: &[&TrainingImage],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Batch> {
    let p = config.patch_size;
    let b = config.batch_size;
    let shape = [b, 1, p, p];
    let mut clean = Vec::with_capacity(b * p * p);
    let mut noisy = Vec::with_capacity(b * p * p);
    let mut inv_gamma = Vec::with_capacity(b * p * p);
    let (lo, hi) = config.inv_gamma_range;
    for _ in 0..b {
        let img = images[rng.random_range(0..images.len())];
        let top = rng.random_range(0..=img.height - p);
        let left = rng.random_range(0..=img.width - p);
        let patch: Vec<f64> = (0..p)
            .flat_map(|i| img.pixels[(top + i) * img.width + left..][..p].iter().copied())
            .collect();
        let t = lo + (hi - lo) * rng.random::<f64>();
        let y = if t == 0.0 {
            patch.clone()
        } else {
            sample_geometry_noise_with(config.geometry, &patch, 1.0 / t, rng)?
        };
        clean.extend_from_slice(&patch);
        noisy.extend_from_slice(&y);
        inv_gamma.extend(std::iter::repeat_n(t, p * p));
    }
    Ok(Batch {
        clean: Tensor::new(shape, clean),
        noisy: Tensor::new(shape, noisy),
        inv_gamma: Tensor::new(shape, inv_gamma),
    })
}

/// Mean squared denoising error of `net` on `batch` and its parameter gradient.
fn loss_and_grad(net: &PotentialNetwork, geometry: PotentialKind, batch: &Batch) -> (f64, Vec<f64>) {
    let mut tape = Tape::new();
    let params = net.parameter_leaves(&mut tape);
    let y = tape.leaf(batch.noisy.clone());
    let cond = tape.leaf(batch.inv_gamma.clone());
    let r = net.residual(&mut tape, y, cond, &params);
    let sq = tape.mul(r, r);
    let s = tape.sum(sq);
    let g = tape.scale(s, 0.5);
    let gy = tape.grad(g, &[y])[0];
    let step = match geometry {
        PotentialKind::Euclidean => gy,
        PotentialKind::Burg => {
            let y2 = tape.leaf(batch.noisy.map(|v| v * v));
            tape.mul(y2, gy)
        }
    };
    let denoised = tape.sub(y, step);
    let x = tape.leaf(batch.clean.clone());
    let diff = tape.sub(denoised, x);
    let sq = tape.mul(diff, diff);
    let s = tape.sum(sq);
    let loss = tape.scale(s, 1.0 / batch.clean.len() as f64);
    let grads = tape.grad(loss, &params);
    let flat = grads.iter().flat_map(|v| tape.value(*v).data().iter().copied()).collect();
    (tape.value(loss).item(), flat)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, weights: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..weights.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            weights[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains a denoiser; the result is a deterministic function of the inputs and `seed`.
///
/// The per-step loss is recorded in the model's training record.
pub fn train(dataset: &[TrainingImage], config: &TrainConfig, seed: u64) -> Result<ScoreDenoiserModel> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::config("training dataset is empty"));
    }
    for (k, img) in dataset.iter().enumerate() {
        if img.pixels.len() != img.height * img.width {
            return Err(Error::config(format!("training image {k} has inconsistent dimensions")));
        }
        if img.pixels.iter().any(|v| !(*v >= PIXEL_FLOOR && *v <= 1.0)) {
            return Err(Error::config(format!("training image {k} has pixels outside [{PIXEL_FLOOR}, 1]")));
        }
    }
    let usable: Vec<&TrainingImage> = dataset
        .iter()
        .filter(|i| i.height >= config.patch_size && i.width >= config.patch_size)
        .collect();
    if usable.is_empty() {
        return Err(Error::config(format!(
            "no training image is at least {0}x{0}",
            config.patch_size
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = PotentialNetwork::init(config.architecture.clone(), rng.random(), config.tail_gain)?;
    let mut adam = Adam::new(net.weights().len());
    let mut losses = Vec::with_capacity(config.steps);
    let mut batch = draw_batch(&usable, config, &mut rng)?;
    for step in 0..config.steps {
        if step > 0 && config.resample_noise {
            batch = draw_batch(&usable, config, &mut rng)?;
        }
        let (loss, grad) = loss_and_grad(&net, config.geometry, &batch);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::domain(format!("training diverged at step {step}")));
        }
        adam.step(net.weights_mut(), &grad, config.learning_rate_at(step));
        losses.push(loss);
        if config.log_every > 0 && (step + 1) % config.log_every == 0 {
            let window = &losses[losses.len().saturating_sub(config.log_every)..];
            log::info!(
                "step {}/{}: mean loss {:.6e}",
                step + 1,
                config.steps,
                window.iter().sum::<f64>() / window.len() as f64
            );
        }
    }

    let record = TrainingRecord {
        seed,
        inv_gamma_range: config.inv_gamma_range,
        steps: config.steps,
        patch_size: config.patch_size,
        batch_size: config.batch_size,
        learning_rate: config.learning_rate,
        loss_curve: losses,
    };
    Ok(ScoreDenoiserModel::new(net, config.geometry, record))
}
