//! Iteration-domain extremum seeking for the gain factor `α` of `Q_α`.
//!
//! Each iteration runs one full experiment at the probed value
//! `α(k) = α̂(k) + a cos(ω_p k)`, measures the cost `J(k)`, and updates the
//! estimate from the high-pass filtered, demodulated cost.

use std::io::Write;

use crate::analysis::close_loop;
use crate::error::{Error, Result};
use crate::linalg;
use crate::lti::Plant;
use crate::signal::SignalSpec;
use crate::sim::{simulate, SimOptions};
use crate::youla::CompositeController;

/// Tuning parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsConfig {
    /// Probe amplitude.
    pub a: f64,
    /// Probe frequency in rad per iteration.
    pub omega_p: f64,
    /// Adaptation gain.
    pub g: f64,
    /// High-pass filter pole, in (0, 1).
    pub h_f: f64,
    /// Initial estimate.
    pub alpha0: f64,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self { a: 0.1, omega_p: 1.8, g: 4.0, h_f: 0.5, alpha0: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsState {
    pub k: usize,
    pub alpha_hat: f64,
    /// High-pass filter memory; `None` until the first cost arrives.
    pub eta: Option<f64>,
    pub a: f64,
    pub omega_p: f64,
    pub g: f64,
    pub h_f: f64,
}

impl EsState {
    pub fn new(cfg: &EsConfig) -> Result<Self> {
        let all = [cfg.a, cfg.omega_p, cfg.g, cfg.h_f, cfg.alpha0];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("extremum seeking parameters must be finite".into()));
        }
        if cfg.a <= 0.0 {
            return Err(Error::InvalidArgument(format!("probe amplitude a must be positive, got {}", cfg.a)));
        }
        if !(cfg.h_f > 0.0 && cfg.h_f < 1.0) {
            return Err(Error::InvalidArgument(format!("filter pole h_f must lie in (0, 1), got {}", cfg.h_f)));
        }
        let turns = cfg.omega_p / std::f64::consts::PI;
        if (turns - turns.round()).abs() < 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "probe frequency {} is a multiple of pi and cannot be demodulated",
                cfg.omega_p
            )));
        }
        Ok(Self { k: 0, alpha_hat: cfg.alpha0, eta: None, a: cfg.a, omega_p: cfg.omega_p, g: cfg.g, h_f: cfg.h_f })
    }

    /// Value to run at iteration `k`.
    pub fn probe(&self) -> f64 {
        self.alpha_hat + self.a * (self.omega_p * self.k as f64).cos()
    }
}

/// Consume the cost measured at `state.probe()` and return the advanced
/// state together with the next probe.
pub fn es_step(state: &EsState, j: f64) -> Result<(EsState, f64)> {
    if !j.is_finite() {
        return Err(Error::NonFinite("measured cost"));
    }
    let mut s = *state;
    let eta = s.eta.unwrap_or(j);
    let zeta = j - eta;
    s.eta = Some(eta + s.h_f * zeta);
    s.alpha_hat -= s.g * s.a * (s.omega_p * s.k as f64).cos() * zeta;
    s.k += 1;
    Ok((s, s.probe()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneRecord {
    pub k: usize,
    pub alpha_probe: f64,
    pub j: f64,
    /// Estimate after the update at this iteration.
    pub alpha_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TuneTrace {
    pub records: Vec<TuneRecord>,
}

impl TuneTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_estimate(&self) -> Option<f64> {
        self.records.last().map(|r| r.alpha_hat)
    }

    /// Mean of `α̂` over the last `window` iterations.
    pub fn trailing_mean(&self, window: usize) -> Option<f64> {
        let n = self.records.len();
        if n == 0 || window == 0 {
            return None;
        }
        let tail = &self.records[n.saturating_sub(window)..];
        Some(tail.iter().map(|r| r.alpha_hat).sum::<f64>() / tail.len() as f64)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,alpha_probe,J,alpha_hat")?;
        for r in &self.records {
            writeln!(out, "{},{:.16e},{:.16e},{:.16e}", r.k, r.alpha_probe, r.j, r.alpha_hat)?;
        }
        Ok(())
    }
}

/// Run `n` iterations against an arbitrary cost oracle.
pub fn tune_with<F>(cfg: &EsConfig, n: usize, mut cost: F) -> Result<TuneTrace>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut state = EsState::new(cfg)?;
    let mut trace = TuneTrace { records: Vec::with_capacity(n) };
    let mut alpha = state.probe();
    for _ in 0..n {
        let j = cost(alpha)?;
        let (next, probe) = es_step(&state, j)?;
        trace.records.push(TuneRecord { k: state.k, alpha_probe: alpha, j, alpha_hat: next.alpha_hat });
        state = next;
        alpha = probe;
    }
    Ok(trace)
}

/// One repeatable experiment: the same plant, references and disturbances
/// at every iteration.
#[derive(Debug, Clone)]
pub struct TuneScenario {
    pub plant: Plant,
    pub composite: CompositeController,
    pub r: SignalSpec,
    pub w: SignalSpec,
    pub sim: SimOptions,
}

impl TuneScenario {
    /// Finite-horizon cost `J(α)` of the true performance output.
    pub fn cost(&self, alpha: f64) -> Result<f64> {
        let ctrl = self.composite.with_alpha(alpha).to_loop_controller()?;
        let a = close_loop(&self.plant, &ctrl)?.a;
        let abscissa = linalg::spectral_abscissa(&a)?;
        if abscissa >= 0.0 {
            return Err(Error::Unstable { what: format!("closed loop at alpha = {alpha}"), abscissa });
        }
        let opts = SimOptions { record_stride: None, ..self.sim };
        let trace = simulate(&self.plant, &ctrl, &self.r, &self.w, &opts)
            .map_err(|e| Error::InvalidArgument(format!("simulation at alpha = {alpha} failed: {e}")))?;
        Ok(trace.cost_z)
    }
}

pub fn tune_alpha(scenario: &TuneScenario, cfg: &EsConfig, n: usize) -> Result<TuneTrace> {
    tune_with(cfg, n, |alpha| scenario.cost(alpha))
}
