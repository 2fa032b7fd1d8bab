//! Bregman proximal gradient solvers regularized by a learned potential.
//!
//! * `Bred`: mirror descent on `F = λf + g_γ` restricted to the box
//!   `[0, R]ⁿ`, with backtracking on the step size.
//! * `Bpnp`: `x ← B_γ(∇h*(∇h(x) - λ∇f(x)))` with unit step, whose objective
//!   is `λf + φ_γ`. If that objective stops decreasing, `λ` is halved and
//!   the phase restarts.
//!
//! Both run a fixed-length warm-start phase with looser parameters first.

mod trace;

use crate::denoiser::{denoise_step, ScoreDenoiserModel, PIXEL_FLOOR};
use crate::error::{Error, Result};
use crate::geometry::{LegendrePotential, PotentialKind};
use crate::metrics::psnr;
use crate::poisson::DataFidelity;

pub use trace::{
    diagnostics, loglog_slope, Diagnostics, RowFlag, SolverTrace, TraceRow, CSV_HEADER, MONOTONICITY_SLACK,
};

/// A differentiable regularizer `g_γ`, together with the geometry it was built for.
pub trait PriorPotential {
    fn geometry(&self) -> PotentialKind;

    fn value(&self, x: &[f64], gamma: f64) -> Result<f64>;

    fn value_and_grad(&self, x: &[f64], gamma: f64) -> Result<(f64, Vec<f64>)>;
}

/// A trained model applied to images of a fixed size.
#[derive(Debug, Clone, Copy)]
pub struct ImagePrior<'a> {
    pub model: &'a ScoreDenoiserModel,
    pub size: (usize, usize),
}

impl PriorPotential for ImagePrior<'_> {
    fn geometry(&self) -> PotentialKind {
        self.model.geometry()
    }

    fn value(&self, x: &[f64], gamma: f64) -> Result<f64> {
        self.model.g_value(x, self.size, gamma)
    }

    fn value_and_grad(&self, x: &[f64], gamma: f64) -> Result<(f64, Vec<f64>)> {
        self.model.g_value_and_grad(x, self.size, gamma)
    }
}

/// `g ≡ 0`: the solvers reduce to plain mirror descent.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPrior(pub PotentialKind);

impl PriorPotential for ZeroPrior {
    fn geometry(&self) -> PotentialKind {
        self.0
    }

    fn value(&self, _: &[f64], _: f64) -> Result<f64> {
        Ok(0.0)
    }

    fn value_and_grad(&self, x: &[f64], _: f64) -> Result<(f64, Vec<f64>)> {
        Ok((0.0, vec![0.0; x.len()]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Bred,
    Bpnp,
}

impl SolverMode {
    pub fn name(self) -> &'static str {
        match self {
            SolverMode::Bred => "bred",
            SolverMode::Bpnp => "bpnp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bred" | "b-red" => Some(SolverMode::Bred),
            "bpnp" | "b-pnp" => Some(SolverMode::Bpnp),
            _ => None,
        }
    }
}

/// Hyperparameters of one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseParams {
    /// Weight `λ` of the data term.
    pub lambda: f64,
    /// Denoiser noise level.
    pub gamma: f64,
    /// Step size (`Bred` only; `Bpnp` always uses 1).
    pub tau: f64,
    /// Denoiser strength `s` (`Bpnp` only).
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktrackConfig {
    pub enabled: bool,
    /// Sufficient-decrease factor, in (0, 1).
    pub gamma: f64,
    /// Shrink factor, in [0, 1).
    pub eta: f64,
    pub max_trials: usize,
}

impl Default for BacktrackConfig {
    fn default() -> Self {
        Self { enabled: true, gamma: 0.8, eta: 0.5, max_trials: 60 }
    }
}

/// `λ` reduction policy for `Bpnp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartConfig {
    /// Objective increase is checked between iterations this far apart.
    pub window: usize,
    pub factor: f64,
    pub max_restarts: usize,
}

impl Default for RestartConfig {
    fn default() -> Self {
        Self { window: 5, factor: 2.0, max_restarts: 6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarmStart {
    pub iterations: usize,
    pub params: PhaseParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mode: SolverMode,
    pub params: PhaseParams,
    pub warm_start: Option<WarmStart>,
    /// Upper bound `R` of the box constraint.
    pub box_bound: f64,
    pub backtracking: BacktrackConfig,
    pub restart: RestartConfig,
    /// Stop when the relative objective change falls below this.
    pub rel_tol: f64,
    /// Iterations after the warm start.
    pub max_iter: usize,
}

/// Photon scales with tabulated warm-start weights.
pub const TABULATED_ALPHAS: [f64; 3] = [20.0, 40.0, 60.0];

impl SolverConfig {
    /// Default parameters for a photon scale `alpha`.
    ///
    /// The weights below are stated for the fidelity of the rescaled
    /// observation `y/α`, which equals `f/α`; with `f` in photon counts they
    /// are divided by `α`. Warm-start weights are 1.5 / 2 / 2.5 at
    /// α = 20 / 40 / 60 (nearest entry otherwise).
    pub fn standard(mode: SolverMode, alpha: f64) -> Self {
        let nearest = TABULATED_ALPHAS
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - alpha).abs().total_cmp(&(b.1 - alpha).abs()))
            .map(|(i, _)| i)
            .unwrap_or(1);
        if !TABULATED_ALPHAS.contains(&alpha) {
            log::warn!("no tabulated warm-start weight for alpha = {alpha}; using alpha = {}", TABULATED_ALPHAS[nearest]);
        }
        let warm_lambda = [1.5, 2.0, 2.5][nearest] / alpha;
        let (params, warm) = match mode {
            SolverMode::Bred => (
                PhaseParams { lambda: 0.5 / alpha, gamma: 500.0, tau: 0.05, strength: 1.0 },
                PhaseParams { lambda: warm_lambda, gamma: 50.0, tau: 1.0, strength: 1.0 },
            ),
            SolverMode::Bpnp => (
                PhaseParams { lambda: 0.025 / alpha, gamma: 500.0, tau: 1.0, strength: 0.05 },
                PhaseParams { lambda: warm_lambda, gamma: 50.0, tau: 1.0, strength: 1.0 },
            ),
        };
        Self {
            mode,
            params,
            warm_start: Some(WarmStart { iterations: 100, params: warm }),
            box_bound: 1.0,
            backtracking: BacktrackConfig::default(),
            restart: RestartConfig::default(),
            rel_tol: 1e-8,
            max_iter: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |p: &PhaseParams, which: &str| -> Result<()> {
            let pos = |v: f64| v > 0.0 && v.is_finite();
            if !pos(p.lambda) || !pos(p.gamma) || !pos(p.tau) {
                return Err(Error::config(format!("{which}: lambda, gamma and tau must be positive and finite")));
            }
            if !(p.strength > 0.0 && p.strength <= 1.0) {
                return Err(Error::config(format!("{which}: strength must lie in (0, 1]")));
            }
            Ok(())
        };
        check(&self.params, "main phase")?;
        if let Some(w) = &self.warm_start {
            check(&w.params, "warm start")?;
        }
        if !(self.box_bound > 0.0 && self.box_bound.is_finite()) {
            return Err(Error::config("box bound must be positive and finite"));
        }
        let bt = &self.backtracking;
        if !(bt.gamma > 0.0 && bt.gamma < 1.0) || !(bt.eta >= 0.0 && bt.eta < 1.0) || bt.max_trials == 0 {
            return Err(Error::config("backtracking needs gamma in (0,1), eta in [0,1) and a positive trial cap"));
        }
        let rs = &self.restart;
        if rs.window == 0 || !(rs.factor > 1.0 && rs.factor.is_finite()) {
            return Err(Error::config("restart window must be positive and factor > 1"));
        }
        if !(self.rel_tol >= 0.0) || self.max_iter == 0 {
            return Err(Error::config("rel_tol must be nonnegative and max_iter positive"));
        }
        Ok(())
    }
}

/// Closed-form Burg mirror step on `[0, R]ⁿ`.
///
/// Each coordinate minimizes `u gᵢ + (u/xᵢ - log(u/xᵢ))/τ` over `(0, R]`:
/// the minimizer is `xᵢ/(1 + τxᵢgᵢ)` when that is positive and at most `R`,
/// and `R` otherwise.
pub fn bred_step(x: &[f64], grad: &[f64], tau: f64, bound: f64) -> Result<Vec<f64>> {
    if x.len() != grad.len() {
        return Err(Error::shape("iterate and gradient differ in length"));
    }
    if !(tau > 0.0) {
        return Err(Error::parameter(format!("step size must be positive, got {tau}")));
    }
    if let Some(i) = x.iter().position(|v| !(*v > 0.0 && *v <= bound)) {
        return Err(Error::domain(format!("x[{i}] = {} is outside (0, {bound}]", x[i])));
    }
    Ok(x.iter()
        .zip(grad)
        .map(|(&xi, &gi)| {
            let den = 1.0 + tau * xi * gi;
            if den > 0.0 {
                let u = xi / den;
                if u <= bound {
                    return u;
                }
            }
            bound
        })
        .collect())
}

/// Mirror step on the box for either geometry; Euclidean is `clip(x - τg, 0, R)`.
pub fn box_mirror_step(h: &LegendrePotential, x: &[f64], grad: &[f64], tau: f64, bound: f64) -> Result<Vec<f64>> {
    match h.kind() {
        PotentialKind::Burg => bred_step(x, grad, tau, bound),
        PotentialKind::Euclidean => {
            if x.len() != grad.len() {
                return Err(Error::shape("iterate and gradient differ in length"));
            }
            Ok(x.iter().zip(grad).map(|(a, g)| (a - tau * g).clamp(0.0, bound)).collect())
        }
    }
}

/// Result of [`backtrack_stepsize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Backtracked {
    pub tau: f64,
    pub x_next: Vec<f64>,
    pub objective_next: f64,
    /// Number of rejected trial steps.
    pub trials: usize,
}

fn is_domain_failure(e: &Error) -> bool {
    matches!(e.root(), Error::Domain(_) | Error::InfiniteDivergence { .. } | Error::MirrorDomain { .. })
}

/// Shrinks `τ ← ητ` from `tau0` until `F(x) - F(T_τ x) >= (γ_bt/τ) D_h(T_τ x, x)`.
///
/// Trial points where `F` or `D_h` is undefined count as rejections.
pub fn backtrack_stepsize(
    x: &[f64],
    objective_x: f64,
    tau0: f64,
    config: &BacktrackConfig,
    mut step: impl FnMut(f64) -> Result<Vec<f64>>,
    mut objective: impl FnMut(&[f64]) -> Result<f64>,
    divergence: impl Fn(&[f64], &[f64]) -> Result<f64>,
) -> Result<Backtracked> {
    let mut tau = tau0;
    let mut trials = 0;
    loop {
        let attempt = step(tau).and_then(|x_next| {
            let f = objective(&x_next)?;
            let d = divergence(&x_next, x)?;
            Ok((x_next, f, d))
        });
        match attempt {
            Ok((x_next, f, d)) if !config.enabled || objective_x - f >= config.gamma / tau * d => {
                return Ok(Backtracked { tau, x_next, objective_next: f, trials });
            }
            Ok(_) => {}
            Err(e) if config.enabled && is_domain_failure(&e) => {}
            Err(e) => return Err(e),
        }
        trials += 1;
        if trials > config.max_trials {
            return Err(Error::BacktrackExhausted { trials, tau });
        }
        tau *= config.eta;
    }
}

/// Result of [`bpnp_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct BpnpStep {
    pub x_next: Vec<f64>,
    /// `λf(x_next) + φ(x_next)` with `φ(B(z)) = s·g(z) - D_h(B(z), z)`.
    pub objective: f64,
    pub range_violation: bool,
}

/// One `B(∇h*(∇h(x) - λ∇f(x)))` iteration.
pub fn bpnp_step<F: DataFidelity + ?Sized, P: PriorPotential + ?Sized>(
    h: &LegendrePotential,
    x: &[f64],
    data: &F,
    prior: &P,
    params: &PhaseParams,
) -> Result<BpnpStep> {
    let u: Vec<f64> = data.grad(x)?.into_iter().map(|v| params.lambda * v).collect();
    let z = h.mirror_step(x, &u, 1.0)?;
    let (gz, grad) = prior.value_and_grad(&z, params.gamma)?;
    let out = denoise_step(h, &z, &grad, params.strength)?;
    let phi = params.strength * gz - h.bregman_div(&out.image, &z)?;
    let objective = params.lambda * data.value(&out.image)? + phi;
    Ok(BpnpStep { x_next: out.image, objective, range_violation: out.range_violation })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    RelTol,
    MaxIter,
    FixedPoint,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::RelTol => "rel-tol",
            StopReason::MaxIter => "max-iter",
            StopReason::FixedPoint => "fixed-point",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    pub x: Vec<f64>,
    pub trace: SolverTrace,
    pub stop: StopReason,
    /// Main-phase `λ` actually used (after any reductions).
    pub lambda: f64,
    /// Warm-start `λ` actually used.
    pub warm_lambda: Option<f64>,
    pub restarts: usize,
    /// Denoiser outputs that left the domain and were clamped.
    pub range_violations: usize,
}

enum PhaseEnd {
    Done(Vec<f64>, StopReason),
    /// `Bpnp` only: the objective rose over the window, or the mirror step was ill-posed.
    Violation(Error),
}

struct Runner<'a, F: ?Sized, P: ?Sized> {
    data: &'a F,
    prior: &'a P,
    h: LegendrePotential,
    config: &'a SolverConfig,
    truth: Option<&'a [f64]>,
    trace: SolverTrace,
    rows: usize,
    range_violations: usize,
}

impl<F: DataFidelity + ?Sized, P: PriorPotential + ?Sized> Runner<'_, F, P> {
    #[allow(clippy::too_many_arguments)]
    fn row(
        &mut self,
        x: &[f64],
        objective: f64,
        step_from: Option<(&[f64], f64)>,
        tau: f64,
        bt_trials: usize,
        flags: Vec<RowFlag>,
    ) -> usize {
        let iter = self.rows;
        self.rows += 1;
        let (dh_residual, step_sq) = match step_from {
            Some((prev, dh)) => (Some(dh), Some(x.iter().zip(prev).map(|(a, b)| (a - b) * (a - b)).sum())),
            None => (None, None),
        };
        let psnr = self.truth.and_then(|t| psnr(x, t).ok());
        self.trace.push(TraceRow { iter, objective, dh_residual, step_sq, tau, bt_trials, psnr, flags });
        iter
    }

    /// `λf(x) + g(x)` and `∇g(x)`.
    fn bred_value_and_grad(&self, x: &[f64], p: &PhaseParams) -> Result<(f64, Vec<f64>)> {
        let (g, grad) = self.prior.value_and_grad(x, p.gamma)?;
        Ok((p.lambda * self.data.value(x)? + g, grad))
    }

    fn converged(&self, prev: f64, next: f64, warm: bool) -> bool {
        !warm && (next - prev).abs() <= self.config.rel_tol * prev.abs().max(f64::MIN_POSITIVE)
    }

    fn bred_phase(
        &mut self,
        mut x: Vec<f64>,
        p: &PhaseParams,
        iterations: usize,
        warm: bool,
        first_flags: Vec<RowFlag>,
    ) -> Result<(Vec<f64>, StopReason)> {
        let bound = self.config.box_bound;
        let bt = BacktrackConfig { enabled: self.config.backtracking.enabled && !warm, ..self.config.backtracking };
        let (mut objective, mut g_grad) = self.bred_value_and_grad(&x, p).map_err(|e| e.at_iteration(self.rows))?;
        self.row(&x, objective, None, p.tau, 0, first_flags);
        let mut tau = p.tau;
        for _ in 0..iterations {
            let iter = self.rows;
            let step = (|| -> Result<(Backtracked, f64, Vec<f64>)> {
                let grad: Vec<f64> = self
                    .data
                    .grad(&x)?
                    .iter()
                    .zip(&g_grad)
                    .map(|(df, dg)| p.lambda * df + dg)
                    .collect();
                let h = self.h;
                // the accepted candidate is always the last one evaluated
                let mut last_grad = Vec::new();
                let bt = backtrack_stepsize(
                    &x,
                    objective,
                    tau,
                    &bt,
                    |t| box_mirror_step(&h, &x, &grad, t, bound),
                    |y| {
                        let (v, g) = self.bred_value_and_grad(y, p)?;
                        last_grad = g;
                        Ok(v)
                    },
                    |a, b| h.bregman_div(a, b),
                )?;
                let dh = h.bregman_div(&bt.x_next, &x)?;
                Ok((bt, dh, last_grad))
            })();
            let (bt, dh, next_grad) = step.map_err(|e| e.at_iteration(iter))?;
            g_grad = next_grad;
            tau = bt.tau;
            let flags = if warm { vec![RowFlag::Warm] } else { vec![] };
            self.row(&bt.x_next, bt.objective_next, Some((&x, dh)), tau, bt.trials, flags);
            let prev = objective;
            objective = bt.objective_next;
            x = bt.x_next;
            if dh == 0.0 && !warm {
                return Ok((x, StopReason::FixedPoint));
            }
            if self.converged(prev, objective, warm) {
                return Ok((x, StopReason::RelTol));
            }
        }
        Ok((x, StopReason::MaxIter))
    }

    fn bpnp_phase(
        &mut self,
        mut x: Vec<f64>,
        p: &PhaseParams,
        iterations: usize,
        warm: bool,
        watch: bool,
        mut first_flags: Vec<RowFlag>,
    ) -> Result<PhaseEnd> {
        let start = p.lambda * self.data.value(&x)? + p.strength * self.prior.value(&x, p.gamma)?;
        first_flags.push(RowFlag::Proxy);
        self.row(&x, start, None, 1.0, 0, first_flags);
        let mut history: Vec<f64> = Vec::new();
        for _ in 0..iterations {
            let iter = self.rows;
            let step = match bpnp_step(&self.h, &x, self.data, self.prior, p) {
                Ok(s) => s,
                Err(e) if matches!(e.root(), Error::MirrorDomain { .. }) => {
                    return Ok(PhaseEnd::Violation(e.at_iteration(iter)));
                }
                Err(e) => return Err(e.at_iteration(iter)),
            };
            let dh = self.h.bregman_div(&step.x_next, &x).map_err(|e| e.at_iteration(iter))?;
            let mut flags = if warm { vec![RowFlag::Warm] } else { vec![] };
            if step.range_violation {
                self.range_violations += 1;
                flags.push(RowFlag::Range);
            }
            self.row(&step.x_next, step.objective, Some((&x, dh)), 1.0, 0, flags);
            x = step.x_next;
            history.push(step.objective);
            let w = self.config.restart.window;
            if watch && history.len() > w {
                let rise = step.objective - history[history.len() - 1 - w];
                if rise > MONOTONICITY_SLACK {
                    return Ok(PhaseEnd::Violation(Error::domain(format!(
                        "objective rose by {rise:e} over {w} iterations at iteration {iter}"
                    ))));
                }
            }
            if dh == 0.0 && !warm {
                return Ok(PhaseEnd::Done(x, StopReason::FixedPoint));
            }
            if history.len() >= 2 && self.converged(history[history.len() - 2], step.objective, warm) {
                return Ok(PhaseEnd::Done(x, StopReason::RelTol));
            }
        }
        Ok(PhaseEnd::Done(x, StopReason::MaxIter))
    }
}

/// Default starting point: the data term's natural initializer clipped to `[PIXEL_FLOOR, R]`.
pub fn default_start<F: DataFidelity + ?Sized>(data: &F, bound: f64) -> Vec<f64> {
    data.initial_point().into_iter().map(|v| v.clamp(PIXEL_FLOOR.min(bound), bound)).collect()
}

/// Runs the warm-start phase and then the main phase until a stopping rule fires.
///
/// `truth`, when given, fills the trace's PSNR column.
pub fn run_solver<F: DataFidelity + ?Sized, P: PriorPotential + ?Sized>(
    data: &F,
    prior: &P,
    config: &SolverConfig,
    x0: Option<&[f64]>,
    truth: Option<&[f64]>,
) -> Result<SolverRun> {
    config.validate()?;
    let n = data.dimension();
    let h = LegendrePotential::new(prior.geometry(), n)?;
    let x0 = match x0 {
        Some(v) => v.to_vec(),
        None => default_start(data, config.box_bound),
    };
    if x0.len() != n {
        return Err(Error::shape(format!("starting point has {} entries, expected {n}", x0.len())));
    }
    if let Some(i) = h.first_outside(&x0) {
        return Err(Error::domain(format!("x0[{i}] = {} is outside the potential domain", x0[i])));
    }
    if config.mode == SolverMode::Bred {
        if let Some(i) = x0.iter().position(|v| *v < 0.0 || *v > config.box_bound) {
            return Err(Error::domain(format!("x0[{i}] = {} is outside [0, {}]", x0[i], config.box_bound)));
        }
    }
    if let Some(t) = truth {
        if t.len() != n {
            return Err(Error::shape("ground truth and problem differ in size"));
        }
    }
    let mut r = Runner { data, prior, h, config, truth, trace: SolverTrace::default(), rows: 0, range_violations: 0 };

    match config.mode {
        SolverMode::Bred => {
            let x_warm = match &config.warm_start {
                Some(w) => r.bred_phase(x0, &w.params, w.iterations, true, vec![RowFlag::Warm])?.0,
                None => x0,
            };
            let (x, stop) = r.bred_phase(x_warm, &config.params, config.max_iter, false, vec![RowFlag::Start])?;
            Ok(SolverRun {
                x,
                trace: r.trace,
                stop,
                lambda: config.params.lambda,
                warm_lambda: config.warm_start.map(|w| w.params.lambda),
                restarts: 0,
                range_violations: r.range_violations,
            })
        }
        SolverMode::Bpnp => {
            let lambda_l1 = config.params.lambda * data.smoothness_bound();
            if lambda_l1 >= 1.0 {
                log::warn!("lambda * L_f = {lambda_l1:e} >= 1: the mirror step is not guaranteed to be well-posed");
            }
            let rs = config.restart;
            let mut restarts = 0;
            let (x_warm, warm_lambda) = match &config.warm_start {
                None => (x0, None),
                Some(w) => {
                    let mut params = w.params;
                    let mut flags = vec![RowFlag::Warm];
                    loop {
                        match r.bpnp_phase(x0.clone(), &params, w.iterations, true, false, flags)? {
                            PhaseEnd::Done(x, _) => break (x, Some(params.lambda)),
                            PhaseEnd::Violation(e) => {
                                if restarts >= rs.max_restarts {
                                    return Err(e);
                                }
                                restarts += 1;
                                params.lambda /= rs.factor;
                                log::warn!("warm start: {e}; lambda reduced to {}", params.lambda);
                                flags = vec![RowFlag::Warm, RowFlag::Restart];
                            }
                        }
                    }
                }
            };
            let mut params = config.params;
            let mut main_restarts = 0;
            let mut flags = vec![RowFlag::Start];
            let (x, stop) = loop {
                let watch = main_restarts < rs.max_restarts;
                match r.bpnp_phase(x_warm.clone(), &params, config.max_iter, false, watch, flags)? {
                    PhaseEnd::Done(x, stop) => break (x, stop),
                    PhaseEnd::Violation(e) => {
                        if main_restarts >= rs.max_restarts {
                            return Err(e);
                        }
                        main_restarts += 1;
                        params.lambda /= rs.factor;
                        log::warn!("{e}; lambda reduced to {}", params.lambda);
                        flags = vec![RowFlag::Start, RowFlag::Restart];
                    }
                }
            };
            Ok(SolverRun {
                x,
                trace: r.trace,
                stop,
                lambda: params.lambda,
                warm_lambda,
                restarts: restarts + main_restarts,
                range_violations: r.range_violations,
            })
        }
    }
}
