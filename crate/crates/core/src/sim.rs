//! Fixed-step RK4 simulation of a plant in feedback with a [`LoopController`].
//!
//! Exogenous inputs (`r`, the independent part of `w`, and the feedforward
//! `φ`) are evaluated in closed form at every stage. A dependent disturbance
//! part `W(r)` is integrated forward from a zero filter state. All states
//! start at zero unless [`run_from`] is used.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::analysis::{close_loop, LoopModel, LoopOutput};
use crate::controller::LoopController;
use crate::error::{Error, Result};
use crate::lti::{Plant, StateSpace};
use crate::signal::{SignalSpec, Spectrum};
use crate::youla::CompositeController;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Step size in seconds.
    pub h: f64,
    /// Horizon in seconds.
    pub t_end: f64,
    /// Keep every `stride`-th sample; `None` keeps only the running costs.
    pub record_stride: Option<usize>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { h: 1e-3, t_end: 100.0, record_stride: Some(1) }
    }
}

impl SimOptions {
    pub fn new(h: f64, t_end: f64) -> Self {
        Self { h, t_end, record_stride: Some(1) }
    }

    pub fn costs_only(mut self) -> Self {
        self.record_stride = None;
        self
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.record_stride = Some(stride.max(1));
        self
    }

    fn steps(&self) -> Result<usize> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidArgument(format!("step h must be positive, got {}", self.h)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon T must be positive, got {}", self.t_end)));
        }
        let n = (self.t_end / self.h).round();
        if !(1.0..=1e10).contains(&n) {
            return Err(Error::InvalidArgument("horizon/step ratio out of range".into()));
        }
        Ok(n as usize)
    }
}

/// Samples of one vector signal, stored row-major (one row per sample).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub width: usize,
    pub data: Vec<f64>,
}

impl Series {
    fn new(width: usize, capacity: usize) -> Self {
        Self { width, data: Vec::with_capacity(width * capacity) }
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.width..(k + 1) * self.width]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.data.iter().skip(i).step_by(self.width.max(1)).cloned().collect()
    }
}

/// Recorded trajectories plus trapezoid costs accumulated on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub h: f64,
    pub t_end: f64,
    pub stride: usize,
    pub t: Vec<f64>,
    pub r: Series,
    pub w: Series,
    pub y: Series,
    pub u: Series,
    pub u_c: Series,
    pub u_q: Series,
    pub f: Series,
    pub z: Series,
    pub z_m: Series,
    /// `[x; controller states; dependency filter states]`
    pub state: Series,
    /// `(1/T) ∫ ‖z‖²` over the whole horizon.
    pub cost_z: f64,
    /// `(1/T) ∫ ‖z_m‖²` over the whole horizon.
    pub cost_zm: f64,
    pub final_state: DVector<f64>,
}

/// Finite-horizon average cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    pub j: f64,
    pub horizon: f64,
    pub step: f64,
}

impl SimulationTrace {
    /// Cost of the true performance output `z`.
    pub fn cost(&self) -> CostReport {
        CostReport { j: self.cost_z, horizon: self.t_end, step: self.h }
    }

    /// Cost of the measured output `z_m`.
    pub fn measured_cost(&self) -> CostReport {
        CostReport { j: self.cost_zm, horizon: self.t_end, step: self.h }
    }

    /// CSV with header `t,r,w,y,u,u_c,u_q,f,z,z_m` (multi-channel signals get
    /// 1-based suffixes) and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let groups: [(&str, &Series); 9] = [
            ("r", &self.r),
            ("w", &self.w),
            ("y", &self.y),
            ("u", &self.u),
            ("u_c", &self.u_c),
            ("u_q", &self.u_q),
            ("f", &self.f),
            ("z", &self.z),
            ("z_m", &self.z_m),
        ];
        let mut header = vec!["t".to_string()];
        for (name, s) in &groups {
            if s.width == 1 {
                header.push(name.to_string());
            } else {
                header.extend((1..=s.width).map(|i| format!("{name}{i}")));
            }
        }
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::new();
        for (k, t) in self.t.iter().enumerate() {
            line.clear();
            line.push_str(&fmt17(*t));
            for (_, s) in &groups {
                for v in s.row(k) {
                    line.push(',');
                    line.push_str(&fmt17(*v));
                }
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Full-precision float formatting used by every CSV writer.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Trapezoid average of `‖C1(y - r) + D12 u‖²` over the recorded samples.
pub fn finite_horizon_cost(trace: &SimulationTrace, c1: &DMatrix<f64>, d12: &DMatrix<f64>) -> Result<CostReport> {
    let n = trace.t.len();
    if n < 2 {
        return Err(Error::InvalidArgument("trace has fewer than two samples".into()));
    }
    let mut vals = Vec::with_capacity(n);
    for k in 0..n {
        let y = DVector::from_row_slice(trace.y.row(k));
        let r = DVector::from_row_slice(trace.r.row(k));
        let u = DVector::from_row_slice(trace.u.row(k));
        vals.push((c1 * (y - r) + d12 * u).norm_squared());
    }
    let dt = trace.t[1] - trace.t[0];
    let horizon = trace.t[n - 1] - trace.t[0];
    let integral = dt * (vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[n - 1]));
    Ok(CostReport { j: integral / horizon, horizon, step: dt })
}

/// Closed-loop model with exogenous input `[w_ind; r; φ]` and its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SimModel {
    pub model: LoopModel,
    pub exo: Spectrum,
}

pub fn build_sim_model(plant: &Plant, ctrl: &LoopController, r: &SignalSpec, w: &SignalSpec) -> Result<SimModel> {
    if r.width() != plant.p2() || w.width() != plant.m1() {
        return Err(Error::Dimension(format!(
            "r must have {} channels and w {} channels",
            plant.p2(),
            plant.m1()
        )));
    }
    if r.dependency().is_some() {
        return Err(Error::Signal("the reference cannot depend on another signal".into()));
    }
    let mut model = close_loop(plant, ctrl)?;
    if let Some(wf) = w.dependency() {
        model = model.with_dependency(wf)?;
    }
    let rs = r.spectrum();
    let phi = ctrl.feedforward_spectrum(&rs)?;
    let exo = w.spectrum().stack(&rs).stack(&phi);
    Ok(SimModel { model, exo })
}

pub fn simulate(plant: &Plant, ctrl: &LoopController, r: &SignalSpec, w: &SignalSpec, opts: &SimOptions) -> Result<SimulationTrace> {
    let sm = build_sim_model(plant, ctrl, r, w)?;
    run(&sm, opts)
}

pub fn simulate_composite(
    plant: &Plant,
    comp: &CompositeController,
    r: &SignalSpec,
    w: &SignalSpec,
    opts: &SimOptions,
) -> Result<SimulationTrace> {
    simulate(plant, &comp.to_loop_controller()?, r, w, opts)
}

struct Rows {
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl Rows {
    fn of(m: &LoopModel, o: LoopOutput) -> Self {
        let rg = m.rows(o);
        Self { c: m.c.rows(rg.start, rg.len()).into_owned(), d: m.d.rows(rg.start, rg.len()).into_owned() }
    }

    fn eval(&self, x: &DVector<f64>, e: &DVector<f64>, out: &mut DVector<f64>) {
        out.gemv(1.0, &self.c, x, 0.0);
        out.gemv(1.0, &self.d, e, 1.0);
    }
}

impl SimModel {
    /// Bounded periodic state trajectory driven by the exogenous spectrum.
    /// Starting from its value at `t = 0` removes every transient,
    /// including the growth of an unstable dependency filter.
    pub fn steady_state(&self) -> Result<Spectrum> {
        let n = self.model.nstates();
        let sys = StateSpace::new(self.model.a.clone(), self.model.b.clone(), DMatrix::identity(n, n), DMatrix::zeros(n, self.exo.width()))?;
        self.exo.through(&sys)
    }

    /// Mean-square value of one output in the periodic steady state.
    pub fn steady_power(&self, o: LoopOutput) -> Result<f64> {
        let m = &self.model;
        let rg = m.rows(o);
        let c = m.c.rows(rg.start, rg.len()).into_owned();
        let d = m.d.rows(rg.start, rg.len()).into_owned();
        let sys = StateSpace::new(m.a.clone(), m.b.clone(), c, d)?;
        Ok(self.exo.through(&sys)?.power())
    }
}

/// Integrate a prepared model from zero initial state.
pub fn run(sm: &SimModel, opts: &SimOptions) -> Result<SimulationTrace> {
    run_from(sm, &DVector::zeros(sm.model.nstates()), opts)
}

/// Integrate a prepared model from the initial state `x0`.
pub fn run_from(sm: &SimModel, x0: &DVector<f64>, opts: &SimOptions) -> Result<SimulationTrace> {
    if x0.len() != sm.model.nstates() {
        return Err(Error::Dimension(format!("initial state has length {}, model has {} states", x0.len(), sm.model.nstates())));
    }
    let steps = opts.steps()?;
    let h = opts.h;
    let m = &sm.model;
    let n = m.nstates();
    let ne = sm.exo.width();
    let t_end = steps as f64 * h;

    let z_rows = Rows::of(m, LoopOutput::Z);
    let zm_rows = Rows::of(m, LoopOutput::Zm);
    let others: Vec<(LoopOutput, Rows)> = [LoopOutput::Y, LoopOutput::U, LoopOutput::Uc, LoopOutput::Uq, LoopOutput::F, LoopOutput::W]
        .into_iter()
        .map(|o| (o, Rows::of(m, o)))
        .collect();

    let stride = opts.record_stride;
    let cap = stride.map(|s| steps / s + 1).unwrap_or(0);
    let mut trace = SimulationTrace {
        h,
        t_end,
        stride: stride.unwrap_or(0),
        t: Vec::with_capacity(cap),
        r: Series::new(m.p2, cap),
        w: Series::new(m.m1, cap),
        y: Series::new(m.p2, cap),
        u: Series::new(m.m2, cap),
        u_c: Series::new(m.m2, cap),
        u_q: Series::new(m.m2, cap),
        f: Series::new(m.nf, cap),
        z: Series::new(m.p1, cap),
        z_m: Series::new(m.p1, cap),
        state: Series::new(n, cap),
        cost_z: 0.0,
        cost_zm: 0.0,
        final_state: DVector::zeros(n),
    };

    let mut x = x0.clone();
    let mut e = DVector::zeros(ne);
    let mut k1 = DVector::zeros(n);
    let mut k2 = DVector::zeros(n);
    let mut k3 = DVector::zeros(n);
    let mut k4 = DVector::zeros(n);
    let mut tmp = DVector::zeros(n);
    let mut zbuf = DVector::zeros(m.p1);
    let mut bufs: Vec<DVector<f64>> = others.iter().map(|(_, r)| DVector::zeros(r.c.nrows())).collect();
    let r_range = m.r_cols();

    let deriv = |x: &DVector<f64>, e: &DVector<f64>, out: &mut DVector<f64>| {
        out.gemv(1.0, &m.a, x, 0.0);
        out.gemv(1.0, &m.b, e, 1.0);
    };

    let mut acc_z = 0.0;
    let mut acc_zm = 0.0;
    let mut record = |k: usize, t: f64, x: &DVector<f64>, e: &DVector<f64>, trace: &mut SimulationTrace, zbuf: &mut DVector<f64>| {
        z_rows.eval(x, e, zbuf);
        let jz = zbuf.norm_squared();
        let rec = matches!(stride, Some(s) if k.is_multiple_of(s));
        if rec {
            trace.t.push(t);
            trace.z.data.extend_from_slice(zbuf.as_slice());
        }
        zm_rows.eval(x, e, zbuf);
        let jzm = zbuf.norm_squared();
        if rec {
            trace.z_m.data.extend_from_slice(zbuf.as_slice());
            trace.r.data.extend_from_slice(&e.as_slice()[r_range.clone()]);
            for ((o, rows), buf) in others.iter().zip(bufs.iter_mut()) {
                rows.eval(x, e, buf);
                let s = match o {
                    LoopOutput::Y => &mut trace.y,
                    LoopOutput::U => &mut trace.u,
                    LoopOutput::Uc => &mut trace.u_c,
                    LoopOutput::Uq => &mut trace.u_q,
                    LoopOutput::F => &mut trace.f,
                    _ => &mut trace.w,
                };
                s.data.extend_from_slice(buf.as_slice());
            }
            trace.state.data.extend_from_slice(x.as_slice());
        }
        (jz, jzm)
    };

    sm.exo.eval_into(0.0, &mut e);
    let (mut prev_z, mut prev_zm) = record(0, 0.0, &x, &e, &mut trace, &mut zbuf);
    for k in 0..steps {
        let t = k as f64 * h;
        // k1 uses e(t), which is already in `e`.
        deriv(&x, &e, &mut k1);
        sm.exo.eval_into(t + 0.5 * h, &mut e);
        tmp.copy_from(&x);
        tmp.axpy(0.5 * h, &k1, 1.0);
        deriv(&tmp, &e, &mut k2);
        tmp.copy_from(&x);
        tmp.axpy(0.5 * h, &k2, 1.0);
        deriv(&tmp, &e, &mut k3);
        let t1 = (k + 1) as f64 * h;
        sm.exo.eval_into(t1, &mut e);
        tmp.copy_from(&x);
        tmp.axpy(h, &k3, 1.0);
        deriv(&tmp, &e, &mut k4);
        x.axpy(h / 6.0, &k1, 1.0);
        x.axpy(h / 3.0, &k2, 1.0);
        x.axpy(h / 3.0, &k3, 1.0);
        x.axpy(h / 6.0, &k4, 1.0);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { t: t1 });
        }
        let (jz, jzm) = record(k + 1, t1, &x, &e, &mut trace, &mut zbuf);
        acc_z += 0.5 * (prev_z + jz);
        acc_zm += 0.5 * (prev_zm + jzm);
        prev_z = jz;
        prev_zm = jzm;
    }
    trace.cost_z = acc_z * h / t_end;
    trace.cost_zm = acc_zm * h / t_end;
    trace.final_state = x;
    Ok(trace)
}
