//! Per-iteration solver records, CSV export and convergence diagnostics.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Absolute slack allowed when checking objective monotonicity.
pub const MONOTONICITY_SLACK: f64 = 1e-9;

pub const CSV_HEADER: &str = "iter,objective,dh_residual,step_sq,tau,bt_trials,psnr,flags";

/// Markers attached to trace rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowFlag {
    /// Row belongs to the warm-start phase.
    Warm,
    /// First row of a convergent phase; no step was taken to reach it.
    Start,
    /// The phase was restarted after a regularization-weight reduction.
    Restart,
    /// The objective is a bound, not an exact value (denoiser-based objective at a non-denoised point).
    Proxy,
    /// The denoiser output left the domain and was clamped.
    Range,
}

impl RowFlag {
    pub fn token(self) -> &'static str {
        match self {
            RowFlag::Warm => "warm",
            RowFlag::Start => "start",
            RowFlag::Restart => "restart",
            RowFlag::Proxy => "proxy",
            RowFlag::Range => "range",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    /// `D_h(x_{k+1}, x_k)` for the step that produced this row.
    pub dh_residual: Option<f64>,
    /// `‖x_{k+1} - x_k‖²`.
    pub step_sq: Option<f64>,
    pub tau: f64,
    pub bt_trials: usize,
    pub psnr: Option<f64>,
    pub flags: Vec<RowFlag>,
}

impl TraceRow {
    pub fn has(&self, flag: RowFlag) -> bool {
        self.flags.contains(&flag)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    pub rows: Vec<TraceRow>,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl SolverTrace {
    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let flags: Vec<&str> = r.flags.iter().map(|f| f.token()).collect();
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.iter,
                num(r.objective),
                opt(r.dh_residual),
                opt(r.step_sq),
                num(r.tau),
                r.bt_trials,
                opt(r.psnr),
                flags.join(";")
            )
            .unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Rows of the final convergent phase: from the last `Start` row to the end.
    pub fn final_phase(&self) -> &[TraceRow] {
        match self.rows.iter().rposition(|r| r.has(RowFlag::Start)) {
            Some(i) => &self.rows[i..],
            None => &self.rows,
        }
    }
}

/// Summary of a solver run's convergence behavior, over the final phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Iteration numbers whose objective exceeds the previous exact one by more than the slack.
    pub monotonicity_violations: Vec<usize>,
    /// `min_{j<=k} D_h(x_{j+1}, x_j)` for `k = 1..K`.
    pub running_min_dh: Vec<f64>,
    /// Least-squares slope of `log(running min)` against `log K` over the last three octaves.
    pub rate_slope: Option<f64>,
    /// Partial sums of `D_h` residuals.
    pub dh_partial_sums: Vec<f64>,
    /// `‖x_K - x_{K-1}‖`.
    pub final_step_norm: Option<f64>,
}

/// Least-squares slope of `log v_k` against `log k` (k is 1-based) for `k >= k_start`.
pub fn loglog_slope(values: &[f64], k_start: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .map(|(i, v)| (i + 1, *v))
        .filter(|(k, v)| *k >= k_start.max(1) && *v > 0.0 && v.is_finite())
        .map(|(k, v)| ((k as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn diagnostics(trace: &SolverTrace) -> Diagnostics {
    let rows = trace.final_phase();
    let mut monotonicity_violations = Vec::new();
    let mut last: Option<f64> = None;
    for r in rows {
        if r.has(RowFlag::Proxy) {
            continue;
        }
        if let Some(prev) = last {
            if r.objective > prev + MONOTONICITY_SLACK {
                monotonicity_violations.push(r.iter);
            }
        }
        last = Some(r.objective);
    }
    let residuals: Vec<f64> = rows.iter().filter_map(|r| r.dh_residual).collect();
    let mut running_min_dh = Vec::with_capacity(residuals.len());
    let mut dh_partial_sums = Vec::with_capacity(residuals.len());
    let (mut m, mut s) = (f64::INFINITY, 0.0);
    for d in &residuals {
        m = m.min(*d);
        s += d;
        running_min_dh.push(m);
        dh_partial_sums.push(s);
    }
    let rate_slope = loglog_slope(&running_min_dh, running_min_dh.len() / 8);
    let final_step_norm = rows.iter().rev().find_map(|r| r.step_sq).map(f64::sqrt);
    Diagnostics { monotonicity_violations, running_min_dh, rate_slope, dh_partial_sums, final_step_norm }
}
