//! The Bregman score denoiser built on a learned potential
//! `g(y) = ½‖y - N(y)‖²`.
//!
//! The denoiser is `B(y) = y - s (∇²h(y))⁻¹ ∇g(y)` with strength `s ∈ (0, 1]`.
//! Everything downstream of the network (the denoiser, `ψ`, `φ` and the
//! convexity probe) uses the scaled potential `s·g`.

mod file;
mod network;
mod train;

use std::sync::atomic::{AtomicBool, Ordering};

use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::geometry::{LegendrePotential, PotentialKind};

pub use network::{NetworkArchitecture, PotentialNetwork, INPUT_CHANNELS};
pub use train::{train, TrainConfig, TrainingImage};

/// Lower clamp applied to denoiser outputs that leave the domain.
pub const PIXEL_FLOOR: f64 = 1e-3;

/// Provenance stored next to the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    pub seed: u64,
    /// Range of `1/γ` seen during training.
    pub inv_gamma_range: (f64, f64),
    pub steps: usize,
    pub patch_size: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss_curve: Vec<f64>,
}

impl Default for TrainingRecord {
    fn default() -> Self {
        Self {
            seed: 0,
            inv_gamma_range: (0.0, 0.1),
            steps: 0,
            patch_size: 0,
            batch_size: 0,
            learning_rate: 0.0,
            loss_curve: Vec::new(),
        }
    }
}

/// Output of [`ScoreDenoiserModel::denoise`].
#[derive(Debug, Clone, PartialEq)]
pub struct Denoised {
    pub image: Vec<f64>,
    /// The raw output left `int dom(h)` and was clamped to `[PIXEL_FLOOR, 1]`.
    pub range_violation: bool,
}

#[derive(Debug)]
pub struct ScoreDenoiserModel {
    network: PotentialNetwork,
    geometry: PotentialKind,
    strength: f64,
    record: TrainingRecord,
    warned_range: AtomicBool,
}

impl Clone for ScoreDenoiserModel {
    fn clone(&self) -> Self {
        Self {
            network: self.network.clone(),
            geometry: self.geometry,
            strength: self.strength,
            record: self.record.clone(),
            warned_range: AtomicBool::new(self.warned_range.load(Ordering::Relaxed)),
        }
    }
}

impl PartialEq for ScoreDenoiserModel {
    fn eq(&self, other: &Self) -> bool {
        self.network == other.network
            && self.geometry == other.geometry
            && self.strength == other.strength
            && self.record == other.record
    }
}

impl ScoreDenoiserModel {
    pub fn new(network: PotentialNetwork, geometry: PotentialKind, record: TrainingRecord) -> Self {
        Self { network, geometry, strength: 1.0, record, warned_range: AtomicBool::new(false) }
    }

    pub fn network(&self) -> &PotentialNetwork {
        &self.network
    }

    pub fn geometry(&self) -> PotentialKind {
        self.geometry
    }

    pub fn record(&self) -> &TrainingRecord {
        &self.record
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn set_strength(&mut self, s: f64) -> Result<()> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::parameter(format!("strength must lie in (0, 1], got {s}")));
        }
        self.strength = s;
        Ok(())
    }

    pub fn with_strength(mut self, s: f64) -> Result<Self> {
        self.set_strength(s)?;
        Ok(self)
    }

    fn potential(&self, n: usize) -> LegendrePotential {
        LegendrePotential::new(self.geometry, n).expect("dimension checked by caller")
    }

    /// Whether `1/γ` lies in the range seen during training.
    pub fn gamma_in_training_range(&self, gamma: f64) -> bool {
        let (lo, hi) = self.record.inv_gamma_range;
        let t = 1.0 / gamma;
        t >= lo && t <= hi
    }

    fn check_inputs(&self, y: &[f64], size: (usize, usize), gamma: f64) -> Result<()> {
        if size.0 * size.1 != y.len() {
            return Err(Error::shape(format!(
                "{} pixels do not form a {}x{} image",
                y.len(),
                size.0,
                size.1
            )));
        }
        self.network.check_size(size.0, size.1)?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::parameter(format!("noise level must be positive, got {gamma}")));
        }
        if let Some(i) = self.potential(y.len()).first_outside(y) {
            return Err(Error::domain(format!("y[{i}] = {} is outside the potential domain", y[i])));
        }
        if !self.gamma_in_training_range(gamma) && !self.warned_range.swap(true, Ordering::Relaxed) {
            let (lo, hi) = self.record.inv_gamma_range;
            log::warn!("1/gamma = {} is outside the training range [{lo}, {hi}]", 1.0 / gamma);
        }
        Ok(())
    }

    fn evaluate(&self, y: &[f64], size: (usize, usize), gamma: f64, with_grad: bool) -> Result<(f64, Vec<f64>)> {
        self.check_inputs(y, size, gamma)?;
        let shape = [1, 1, size.0, size.1];
        let mut tape = Tape::new();
        let params = self.network.parameter_leaves(&mut tape);
        let yv = tape.leaf(Tensor::new(shape, y.to_vec()));
        let cond = tape.leaf(Tensor::full(shape, 1.0 / gamma));
        let r = self.network.residual(&mut tape, yv, cond, &params);
        let sq = tape.mul(r, r);
        let s = tape.sum(sq);
        let g = tape.scale(s, 0.5);
        let value = tape.value(g).item();
        if !with_grad {
            return Ok((value, Vec::new()));
        }
        let grad = tape.grad(g, &[yv])[0];
        Ok((value, tape.value(grad).data().to_vec()))
    }

    /// `g(y) = ½‖y - N(y)‖²` for an image of `size = (height, width)`.
    pub fn g_value(&self, y: &[f64], size: (usize, usize), gamma: f64) -> Result<f64> {
        Ok(self.evaluate(y, size, gamma, false)?.0)
    }

    /// Exact reverse-mode `∇g(y)`.
    pub fn g_grad(&self, y: &[f64], size: (usize, usize), gamma: f64) -> Result<Vec<f64>> {
        Ok(self.evaluate(y, size, gamma, true)?.1)
    }

    pub fn g_value_and_grad(&self, y: &[f64], size: (usize, usize), gamma: f64) -> Result<(f64, Vec<f64>)> {
        self.evaluate(y, size, gamma, true)
    }

    /// `B(y) = y - s (∇²h(y))⁻¹ ∇g(y)`, clamped to `[PIXEL_FLOOR, 1]` if it leaves the domain.
    pub fn denoise(&self, y: &[f64], size: (usize, usize), gamma: f64) -> Result<Denoised> {
        let grad = self.g_grad(y, size, gamma)?;
        self.denoise_with_grad(y, &grad)
    }

    /// The denoiser step for a precomputed `∇g(y)`.
    pub fn denoise_with_grad(&self, y: &[f64], grad: &[f64]) -> Result<Denoised> {
        denoise_step(&self.potential(y.len()), y, grad, self.strength)
    }

    /// `ψ(y) = -h(y) + <∇h(y), y> - s·g(y)`.
    pub fn psi_value(&self, y: &[f64], size: (usize, usize), gamma: f64) -> Result<f64> {
        let g = self.g_value(y, size, gamma)?;
        let h = self.potential(y.len());
        let dual: f64 = h.grad(y)?.iter().zip(y).map(|(a, b)| a * b).sum();
        Ok(-h.value(y)? + dual - self.strength * g)
    }

    /// `φ(B(y)) = s·g(y) - D_h(B(y), y)`. Also returns the denoised point.
    pub fn phi_along_trajectory(&self, y: &[f64], size: (usize, usize), gamma: f64) -> Result<(f64, Denoised)> {
        let (g, grad) = self.g_value_and_grad(y, size, gamma)?;
        let out = self.denoise_with_grad(y, &grad)?;
        let d = self.potential(y.len()).bregman_div(&out.image, y)?;
        Ok((self.strength * g - d, out))
    }

    /// Margin of the local convexity condition of `ψ ∘ ∇h*` at `y` along `d` (Burg only).
    pub fn convexity_probe(&self, y: &[f64], d: &[f64], size: (usize, usize), gamma: f64) -> Result<f64> {
        if self.geometry != PotentialKind::Burg {
            return Err(Error::parameter("the convexity probe is defined for the Burg geometry"));
        }
        self.check_inputs(y, size, gamma)?;
        let s = self.strength;
        convexity_margin(y, d, |p| Ok(self.g_grad(p, size, gamma)?.into_iter().map(|v| s * v).collect()))
    }
}

/// `y - s (∇²h(y))⁻¹ ∇g(y)`, clamped to `[PIXEL_FLOOR, 1]` if it leaves `int dom(h)`.
pub fn denoise_step(h: &LegendrePotential, y: &[f64], grad: &[f64], strength: f64) -> Result<Denoised> {
    let step = h.hess_inv_apply(y, grad)?;
    let mut image: Vec<f64> = y.iter().zip(&step).map(|(a, d)| a - strength * d).collect();
    let range_violation = !h.in_domain(&image);
    if range_violation {
        image.iter_mut().for_each(|v| *v = v.clamp(PIXEL_FLOOR, 1.0));
    }
    Ok(Denoised { image, range_violation })
}

/// `Σ (1 - 2yᵢ∂ᵢg)/yᵢ² dᵢ² - <∇²g d, d>` for a potential given by its gradient.
///
/// The Hessian term is a central difference of `grad` along `d` with step
/// `1e-4·‖y‖∞/‖d‖∞`, shortened if needed so both probe points stay positive.
pub fn convexity_margin(
    y: &[f64],
    d: &[f64],
    grad: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<f64> {
    if y.len() != d.len() {
        return Err(Error::shape("probe direction and point differ in length"));
    }
    if let Some(i) = y.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::domain(format!("y[{i}] = {} is not positive", y[i])));
    }
    let d_inf = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if d_inf == 0.0 {
        return Err(Error::parameter("probe direction must be nonzero"));
    }
    let y_inf = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut eps = 1e-4 * y_inf / d_inf;
    for (yi, di) in y.iter().zip(d) {
        if di.abs() > 0.0 {
            eps = eps.min(0.5 * yi / di.abs());
        }
    }
    let g0 = grad(y)?;
    let plus: Vec<f64> = y.iter().zip(d).map(|(a, b)| a + eps * b).collect();
    let minus: Vec<f64> = y.iter().zip(d).map(|(a, b)| a - eps * b).collect();
    let gp = grad(&plus)?;
    let gm = grad(&minus)?;
    let curvature: f64 = gp.iter().zip(&gm).zip(d).map(|((p, m), di)| (p - m) / (2.0 * eps) * di).sum();
    let bound: f64 = y
        .iter()
        .zip(&g0)
        .zip(d)
        .map(|((yi, gi), di)| (1.0 - 2.0 * yi * gi) / (yi * yi) * di * di)
        .sum();
    Ok(bound - curvature)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_arch() -> NetworkArchitecture {
        NetworkArchitecture { channels: vec![4, 6], kernel_size: 3, blocks: 1, bias: true }
    }

    fn random_model(seed: u64) -> ScoreDenoiserModel {
        let net = PotentialNetwork::init(tiny_arch(), seed, 1.0).unwrap();
        ScoreDenoiserModel::new(net, PotentialKind::Burg, TrainingRecord::default())
    }

    fn image(seed: u64, n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.2 + 0.6 * (((i as u64 * 2654435761 + seed) % 1000) as f64 / 1000.0)).collect()
    }

    #[test]
    fn identity_network_gives_zero_potential() {
        let net = PotentialNetwork::identity(tiny_arch()).unwrap();
        let m = ScoreDenoiserModel::new(net, PotentialKind::Burg, TrainingRecord::default());
        let y = image(1, 16);
        assert_eq!(m.g_value(&y, (4, 4), 25.0).unwrap(), 0.0);
        assert!(m.g_grad(&y, (4, 4), 25.0).unwrap().iter().all(|v| *v == 0.0));
        let out = m.denoise(&y, (4, 4), 25.0).unwrap();
        assert_eq!(out.image, y);
        assert!(!out.range_violation);
        let (phi, _) = m.phi_along_trajectory(&y, (4, 4), 25.0).unwrap();
        assert_eq!(phi, 0.0);
        let ones = vec![1.0; 16];
        assert!((m.psi_value(&ones, (4, 4), 25.0).unwrap() + 16.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let m = random_model(3);
        let y = image(5, 64);
        let g = m.g_grad(&y, (8, 8), 20.0).unwrap();
        let h = 1e-5;
        for i in (0..64).step_by(7) {
            let mut p = y.clone();
            p[i] += h;
            let mut q = y.clone();
            q[i] -= h;
            let fd = (m.g_value(&p, (8, 8), 20.0).unwrap() - m.g_value(&q, (8, 8), 20.0).unwrap()) / (2.0 * h);
            let rel = (fd - g[i]).abs() / g[i].abs().max(1e-6);
            assert!(rel < 1e-5, "coordinate {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn linear_network_gradient_is_closed_form() {
        // no blocks, one scale, no bias: r(y) = T y with T linear, so ∇g = Tᵀ T y
        let arch = NetworkArchitecture { channels: vec![3], kernel_size: 3, blocks: 0, bias: false };
        let mut net = PotentialNetwork::init(arch.clone(), 9, 1.0).unwrap();
        // silence the 1/γ input plane of the head conv: weights [3, 2, 3, 3]
        for co in 0..3 {
            for t in 0..9 {
                net.weights_mut()[(co * 2 + 1) * 9 + t] = 0.0;
            }
        }
        let m = ScoreDenoiserModel::new(net, PotentialKind::Euclidean, TrainingRecord::default());
        let n = 25;
        let residual = |v: &[f64]| -> Vec<f64> {
            // g = ½‖Tv‖², recover Tv through a single-coordinate probe of the network
            let mut tape = Tape::new();
            let params = m.network().parameter_leaves(&mut tape);
            let yv = tape.leaf(Tensor::new([1, 1, 5, 5], v.to_vec()));
            let c = tape.leaf(Tensor::full([1, 1, 5, 5], 0.04));
            let r = m.network().residual(&mut tape, yv, c, &params);
            tape.value(r).data().to_vec()
        };
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                residual(&e)
            })
            .collect();
        let y = image(2, n);
        let ty: Vec<f64> = (0..n).map(|i| (0..n).map(|j| cols[j][i] * y[j]).sum()).collect();
        let expected: Vec<f64> = (0..n).map(|j| (0..n).map(|i| cols[j][i] * ty[i]).sum()).collect();
        let got = m.g_grad(&y, (5, 5), 25.0).unwrap();
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
        // Euclidean denoiser is the gradient step
        let out = m.denoise(&y, (5, 5), 25.0).unwrap();
        for i in 0..n {
            assert_eq!(out.image[i], y[i] - got[i]);
        }
    }

    #[test]
    fn psi_identity_and_phi_inequality() {
        let m = random_model(4).with_strength(0.5).unwrap();
        let y = image(9, 16);
        let h = LegendrePotential::burg(16);
        let g = m.g_value(&y, (4, 4), 30.0).unwrap();
        let psi = m.psi_value(&y, (4, 4), 30.0).unwrap();
        let dual: f64 = h.grad(&y).unwrap().iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((psi + h.value(&y).unwrap() - dual + 0.5 * g).abs() < 1e-12);
        let (phi, _) = m.phi_along_trajectory(&y, (4, 4), 30.0).unwrap();
        assert!(phi <= 0.5 * g && g >= 0.0);
    }

    #[test]
    fn margin_closed_forms() {
        let y = [1.0, 0.5];
        let d = [0.3, -0.7];
        let zero = convexity_margin(&y, &d, |p| Ok(vec![0.0; p.len()])).unwrap();
        assert!((zero - (0.09 + 0.49 / 0.25)).abs() < 1e-12);
        let c = 0.1;
        let m = convexity_margin(&[1.0], &[1.0], |p| Ok(vec![c * p[0]])).unwrap();
        assert!((m - (1.0 - 3.0 * c)).abs() < 1e-9);
        assert!(convexity_margin(&[1.0], &[0.0], |p| Ok(p.to_vec())).is_err());
    }

    #[test]
    fn input_validation() {
        let m = random_model(1);
        let mut y = image(1, 16);
        assert!(matches!(m.g_value(&y, (4, 3), 25.0), Err(Error::Shape(_))));
        assert!(matches!(m.g_value(&image(1, 9), (3, 3), 25.0), Err(Error::Shape(_))));
        y[3] = -0.1;
        assert!(matches!(m.g_value(&y, (4, 4), 25.0), Err(Error::Domain(_))));
        assert!(m.clone().with_strength(0.0).is_err());
        assert!(m.gamma_in_training_range(50.0));
        assert!(!m.gamma_in_training_range(5.0));
    }

    #[test]
    fn relaxed_denoiser_hand_values() {
        let m = random_model(1);
        let out = m.denoise_with_grad(&[0.5], &[0.2]).unwrap();
        assert!((out.image[0] - 0.45).abs() < 1e-15);
        let m = m.with_strength(0.05).unwrap();
        let out = m.denoise_with_grad(&[0.5], &[0.2]).unwrap();
        assert!((out.image[0] - 0.4975).abs() < 1e-15);
    }

    #[test]
    fn leaving_the_domain_is_clamped_and_reported() {
        let m = random_model(1);
        let out = m.denoise_with_grad(&[0.5, 0.5], &[10.0, 0.1]).unwrap();
        assert!(out.range_violation);
        assert_eq!(out.image[0], PIXEL_FLOOR);
        assert!((out.image[1] - 0.475).abs() < 1e-15);
    }
}
