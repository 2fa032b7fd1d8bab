//! Poisson observation model: Kullback-Leibler data fidelity, its gradient,
//! the relative-smoothness constant and the count sampler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convolution::ConvolutionOperator;
use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// A smooth data-fidelity term `f` driven by the solvers.
pub trait DataFidelity: Send + Sync {
    fn dimension(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Constant `L` such that `L h - f` is convex for the geometry this
    /// term is meant to be used with.
    fn smoothness_bound(&self) -> f64;

    /// Natural starting point for an iterative solver (not yet projected).
    fn initial_point(&self) -> Vec<f64>;
}

/// `f(x) = Σ yᵢ log(yᵢ / (α(Ax)ᵢ)) + α(Ax)ᵢ - yᵢ` with `0 log 0 = 0`.
#[derive(Debug, Clone)]
pub struct PoissonProblem {
    y: Vec<f64>,
    alpha: f64,
    op: ConvolutionOperator,
    l1_of_y: f64,
}

impl PoissonProblem {
    pub fn new(y: Vec<f64>, alpha: f64, op: ConvolutionOperator) -> Result<Self> {
        if y.len() != op.len() {
            return Err(Error::shape(format!(
                "observation has {} entries, operator expects {}",
                y.len(),
                op.len()
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::parameter(format!("photon scale must be positive, got {alpha}")));
        }
        if let Some(v) = y.iter().find(|v| !(v.is_finite() && **v >= 0.0 && v.fract() == 0.0)) {
            return Err(Error::parameter(format!("count {v} is not a nonnegative integer")));
        }
        let l1_of_y = y.iter().sum();
        Ok(Self { y, alpha, op, l1_of_y })
    }

    pub fn observation(&self) -> &[f64] {
        &self.y
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn operator(&self) -> &ConvolutionOperator {
        &self.op
    }

    /// `‖y‖₁`, the relative-smoothness constant of `f` w.r.t. Burg's entropy.
    pub fn nolip_bound(&self) -> f64 {
        self.l1_of_y
    }

    /// Observation rescaled to image intensities, `y / α`.
    pub fn normalized_observation(&self) -> Vec<f64> {
        self.y.iter().map(|v| v / self.alpha).collect()
    }

    fn blurred(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ax = self.op.apply_forward(x)?;
        if let Some(i) = ax.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!("(Ax)[{i}] = {} is not positive", ax[i])));
        }
        Ok(ax)
    }

    pub fn datafit_value(&self, x: &[f64]) -> Result<f64> {
        let ax = self.blurred(x)?;
        Ok(ax
            .iter()
            .zip(&self.y)
            .map(|(&ax, &y)| {
                let rate = self.alpha * ax;
                if y == 0.0 {
                    rate
                } else {
                    y * (y / rate).ln() + rate - y
                }
            })
            .sum())
    }

    /// `∇f(x) = Aᵀ(α·1 - y ⊘ Ax)`.
    pub fn datafit_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ax = self.blurred(x)?;
        let r: Vec<f64> = ax.iter().zip(&self.y).map(|(ax, y)| self.alpha - y / ax).collect();
        self.op.apply_adjoint(&r)
    }
}

impl DataFidelity for PoissonProblem {
    fn dimension(&self) -> usize {
        self.op.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.datafit_value(x)
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.datafit_grad(x)
    }

    fn smoothness_bound(&self) -> f64 {
        self.nolip_bound()
    }

    /// `Aᵀ(y/α)`: the back-projected observation in image units.
    fn initial_point(&self) -> Vec<f64> {
        self.op
            .apply_adjoint(&self.normalized_observation())
            .expect("observation matches operator shape")
    }
}

/// `f(x) = ½‖Ax - b‖²`, used to check the Euclidean reductions.
#[derive(Debug, Clone)]
pub struct LeastSquaresProblem {
    b: Vec<f64>,
    op: ConvolutionOperator,
}

impl LeastSquaresProblem {
    pub fn new(b: Vec<f64>, op: ConvolutionOperator) -> Result<Self> {
        if b.len() != op.len() {
            return Err(Error::shape("target does not match operator shape"));
        }
        Ok(Self { b, op })
    }

    pub fn operator(&self) -> &ConvolutionOperator {
        &self.op
    }
}

impl DataFidelity for LeastSquaresProblem {
    fn dimension(&self) -> usize {
        self.op.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let ax = self.op.apply_forward(x)?;
        Ok(0.5 * ax.iter().zip(&self.b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ax = self.op.apply_forward(x)?;
        let r: Vec<f64> = ax.iter().zip(&self.b).map(|(a, b)| a - b).collect();
        self.op.apply_adjoint(&r)
    }

    /// `‖A‖² ≤ ‖k‖₁² = 1` for a normalized nonnegative kernel.
    fn smoothness_bound(&self) -> f64 {
        1.0
    }

    fn initial_point(&self) -> Vec<f64> {
        self.op.apply_adjoint(&self.b).expect("target matches operator shape")
    }
}

/// Draws `y ~ Poisson(α A x)` with a seeded generator.
pub fn sample_poisson(
    x: &[f64],
    op: &ConvolutionOperator,
    alpha: f64,
    seed: u64,
) -> Result<PoissonProblem> {
    if let Some(i) = x.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("x[{i}] = {} is not strictly positive", x[i])));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::parameter(format!("photon scale must be positive, got {alpha}")));
    }
    let ax = op.apply_forward(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = ax.iter().map(|v| poisson_variate(alpha * v, &mut rng) as f64).collect();
    PoissonProblem::new(y, alpha, op.clone())
}

/// Rate below which Poisson variates are drawn by sequential inversion.
const INVERSION_MAX_RATE: f64 = 30.0;

/// One exact Poisson variate with the given rate.
///
/// Small rates use sequential inversion of the CDF; larger ones use
/// Hörmann's transformed rejection with squeeze (PTRS).
pub fn poisson_variate<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    assert!(rate >= 0.0 && rate.is_finite(), "Poisson rate must be finite and >= 0");
    if rate == 0.0 {
        return 0;
    }
    if rate < INVERSION_MAX_RATE {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-rate).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= rate / k as f64;
            let next = cdf + p;
            if next == cdf {
                // tail mass below rounding; u fell in the last representable bin
                break;
            }
            cdf = next;
        }
        return k;
    }
    let slam = rate.sqrt();
    let loglam = rate.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + rate + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
            <= -rate + k * loglam - ln_gamma(k + 1.0)
        {
            return k as u64;
        }
    }
}
