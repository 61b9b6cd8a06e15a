//! Synthesis, verification, analysis, simulation and tuning driven by a
//! validated [`Scenario`].

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use mocc_core::analysis::{
    assemble_closed_loop, close_loop, decompose_lemma1, decompose_with_nominal, hinf_norm_peak, theorem1_decomposition, theorem2_bound,
    ClosedLoopSystem, HinfNorm, LemmaDecomposition, LoopOutput,
};
use mocc_core::baselines::{dobc_synthesize, hinf_tracking_synthesize_with, DobcDesign, HinfFeedforward};
use mocc_core::controller::LoopController;
use mocc_core::es::{tune_alpha, TuneScenario, TuneTrace};
use mocc_core::feedforward::{lqt_minimal_cost, AnticausalFeedforward};
use mocc_core::linalg;
use mocc_core::lti::{FrequencyGrid, StateSpace};
use mocc_core::riccati::{hinf_central, hinf_gamma_min, lqt_synthesize, HinfDesign, LqtDesign};
use mocc_core::signal::SignalSpec;
use mocc_core::sim::{build_sim_model, run, SimOptions};
use mocc_core::youla::{assemble_composite, verify_transfer_equality, CompositeController, NominalBlock, TransferCheck, Tracking};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{matrix, ControllerKind, HinfFeedforwardKind, MoccMode, Scenario, NORM_ROW};
use crate::report::{Band, CellReport, ControllerReport, Metadata, NormEntry, PerformanceReport, PowerTerms};

/// Command-line overrides applied on top of a scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub h: Option<f64>,
    pub t_end: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, sc: &mut Scenario) -> Result<()> {
        if let Some(h) = self.h {
            if !(h > 0.0 && h.is_finite()) {
                bail!("--h must be positive, got {h}");
            }
            sc.simulation.h = h;
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0 && t.is_finite()) {
                bail!("--T must be positive, got {t}");
            }
            sc.simulation.t_end = t;
        }
        if let Some(a) = self.alpha {
            let m = sc.mocc.as_mut().ok_or_else(|| anyhow!("--alpha needs a [controllers.mocc] section"))?;
            m.alpha = a;
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                bail!("--gamma must be positive, got {g}");
            }
            if let Some(m) = sc.mocc.as_mut() {
                m.gamma = g;
            }
            if let Some(h) = sc.hinf.as_mut() {
                h.gamma = g;
            }
        }
        Ok(())
    }
}

/// A synthesized controller ready for simulation.
#[derive(Debug, Clone)]
pub struct Built {
    pub kind: ControllerKind,
    pub ctrl: LoopController,
    pub composite: Option<CompositeController>,
    /// Closed-loop split of the MOCC loop, available at `α = 1`.
    pub decomposition: Option<LemmaDecomposition>,
    pub gamma: Option<f64>,
}

fn lqt_parts(sc: &Scenario) -> Result<(LqtDesign, AnticausalFeedforward)> {
    let lqt = lqt_synthesize(&sc.plant).context("LQ tracking synthesis")?;
    let ff = AnticausalFeedforward::lqt(&sc.plant, &lqt)?;
    Ok((lqt, ff))
}

fn dobc_design(sc: &Scenario, lqt: &LqtDesign) -> Result<DobcDesign> {
    let d = sc.dobc.as_ref().ok_or_else(|| anyhow!("missing [controllers.dobc]"))?;
    Ok(dobc_synthesize(
        &sc.plant,
        &matrix("controllers.dobc.aw", &d.aw)?,
        &matrix("controllers.dobc.cw", &d.cw)?,
        &sc.observer,
        &matrix("controllers.dobc.l_w", &d.l_w)?,
        lqt,
    )?)
}

pub fn mocc_composite(sc: &Scenario) -> Result<(CompositeController, Option<LemmaDecomposition>, f64)> {
    let m = sc.mocc.as_ref().ok_or_else(|| anyhow!("missing [controllers.mocc]"))?;
    let plant = &sc.plant;
    let (lqt, ff) = lqt_parts(sc)?;
    let k = hinf_central(plant, m.gamma).with_context(|| format!("H∞ synthesis at gamma = {}", m.gamma))?.controller();
    let (nominal, tracking, dec) = match m.mode {
        MoccMode::Shared => {
            let nom = LoopController::observer_feedback("lqt", plant, &lqt.f, &sc.observer, Some(ff.clone()))?;
            let dec = decompose_with_nominal(plant, &nom, &k)?;
            (NominalBlock::Shared { f: lqt.f.clone() }, Tracking::Feedforward(ff), dec)
        }
        MoccMode::Static => {
            let dc = matrix("controllers.mocc.dc", m.dc.as_ref().ok_or_else(|| anyhow!("missing controllers.mocc.dc"))?)?;
            let dec = decompose_lemma1(plant, &StateSpace::gain(dc.clone())?, &k)?;
            (NominalBlock::Static { dc }, Tracking::ErrorDriven, dec)
        }
    };
    let comp = assemble_composite(plant, nominal, &k, &sc.observer, m.alpha, tracking)?;
    let dec = (m.alpha == 1.0).then_some(dec);
    Ok((comp, dec, m.gamma))
}

pub fn build(sc: &Scenario, kind: ControllerKind) -> Result<Built> {
    let plant = &sc.plant;
    let mut built = Built { kind, ctrl: LoopController::output_feedback("", &StateSpace::gain(DMatrix::zeros(plant.m2(), plant.p2()))?, false)?, composite: None, decomposition: None, gamma: None };
    match kind {
        ControllerKind::Mocc => {
            let (comp, dec, gamma) = mocc_composite(sc)?;
            built.ctrl = comp.to_loop_controller()?;
            built.composite = Some(comp);
            built.decomposition = dec;
            built.gamma = Some(gamma);
        }
        ControllerKind::Lqt => {
            let (lqt, ff) = lqt_parts(sc)?;
            built.ctrl = LoopController::observer_feedback("lqt", plant, &lqt.f, &sc.observer, Some(ff))?;
        }
        ControllerKind::Hinf => {
            let h = sc.hinf.as_ref().ok_or_else(|| anyhow!("missing [controllers.hinf]"))?;
            let variant = match h.feedforward {
                HinfFeedforwardKind::Game => HinfFeedforward::GameTheoretic,
                HinfFeedforwardKind::Nominal => HinfFeedforward::Nominal,
            };
            let d = hinf_tracking_synthesize_with(plant, h.gamma, variant).with_context(|| format!("H∞ synthesis at gamma = {}", h.gamma))?;
            built.ctrl = d.controller(plant)?;
            built.gamma = Some(h.gamma);
        }
        ControllerKind::Dobc => {
            let (lqt, _) = lqt_parts(sc)?;
            built.ctrl = dobc_design(sc, &lqt)?.controller(plant)?;
        }
    }
    built.ctrl.name = kind.label().to_string();
    Ok(built)
}

pub fn sim_options(sc: &Scenario, record: bool) -> SimOptions {
    let opts = SimOptions::new(sc.simulation.h, sc.simulation.t_end);
    if record {
        opts.stride(sc.simulation.trace_stride)
    } else {
        opts.costs_only()
    }
}

fn independent_part(w: &SignalSpec) -> Result<SignalSpec> {
    Ok(SignalSpec::new(w.channels().to_vec())?)
}

fn power_terms(sc: &Scenario, b: &Built, w: &SignalSpec) -> Result<Option<PowerTerms>> {
    let Some(dec) = &b.decomposition else { return Ok(None) };
    match w.dependency() {
        None => {
            let t = theorem1_decomposition(dec, w, &sc.r)?;
            Ok(Some(PowerTerms::Independent { z_sq: t.z_sq, z1_sq: t.z1_sq, z2_sq: t.z2_sq }))
        }
        Some(wf) => {
            let gamma = b.gamma.ok_or_else(|| anyhow!("no gamma for the dependent split"))?;
            let t = theorem2_bound(dec, gamma, &sc.r, &independent_part(w)?, wf)?;
            Ok(Some(PowerTerms::Dependent {
                z_sq: t.z_sq,
                z1_sq: t.z1_sq,
                z2_tilde_sq: t.z2_tilde_sq,
                z2_sq: t.z2_sq,
                w_sq: t.w_sq,
                t1_hinf: t.t1_hinf,
                bound: t.bound,
                bound_holds: t.bound_holds,
            }))
        }
    }
}

fn trace_path(dir: &Path, controller: &str, disturbance: &str) -> PathBuf {
    dir.join(format!("trace_{controller}_{disturbance}.csv"))
}

fn run_cell(sc: &Scenario, b: &Built, name: &str, w: &SignalSpec, trace_dir: Option<&Path>) -> Result<CellReport> {
    let record = trace_dir.is_some() && sc.simulation.traces;
    let sm = build_sim_model(&sc.plant, &b.ctrl, &sc.r, w)?;
    let tr = run(&sm, &sim_options(sc, record)).with_context(|| format!("simulating {} with {name}", b.kind.label()))?;
    if record {
        let path = trace_path(trace_dir.unwrap_or(Path::new(".")), b.kind.label(), name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        tr.write_csv(BufWriter::new(f))?;
    }
    let mut cell = CellReport::failed(name, String::new());
    cell.error = None;
    cell.cost = Some(tr.cost_z);
    cell.measured_cost = Some(tr.cost_zm);
    if sc.analysis.power_norms {
        cell.steady_power = Some(sm.steady_power(LoopOutput::Z)?);
        cell.power_terms = power_terms(sc, b, w)?;
    }
    cell.band = sc.expectation(b.kind.label(), name).map(|e| Band::new(e, tr.cost_z));
    Ok(cell)
}

pub fn closed_loop_norm(sc: &Scenario, ctrl: &LoopController) -> Result<HinfNorm> {
    let cl = ClosedLoopSystem::from_loop(&close_loop(&sc.plant, ctrl)?);
    if !cl.is_stable()? {
        bail!("closed loop of {} is unstable", ctrl.name);
    }
    Ok(hinf_norm_peak(&cl.w_channel()?, 1e-10)?)
}

fn metadata(sc: &Scenario) -> Metadata {
    Metadata {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        h: sc.simulation.h,
        t_end: sc.simulation.t_end,
    }
}

fn chain(e: &anyhow::Error) -> String {
    format!("{e:#}")
}

/// Every requested controller against every disturbance. Cells run in
/// the rayon pool; the report keeps configuration order. When `trace_dir`
/// is given and traces are enabled, each cell writes its trace there.
pub fn run_benchmark(sc: &Scenario, trace_dir: Option<&Path>) -> PerformanceReport {
    let built: Vec<(ControllerKind, std::result::Result<Built, String>)> =
        sc.controllers.par_iter().map(|&k| (k, build(sc, k).map_err(|e| chain(&e)))).collect();
    let jobs: Vec<(usize, usize)> = (0..built.len()).flat_map(|i| (0..sc.disturbances.len()).map(move |j| (i, j))).collect();
    let cells: Vec<CellReport> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (name, w) = &sc.disturbances[j];
            match &built[i].1 {
                Ok(b) => run_cell(sc, b, name, w, trace_dir).unwrap_or_else(|e| CellReport::failed(name, chain(&e))),
                Err(e) => CellReport::failed(name, format!("synthesis failed: {e}")),
            }
        })
        .collect();
    let norms: Vec<Option<std::result::Result<HinfNorm, String>>> = built
        .par_iter()
        .map(|(_, b)| match b {
            Ok(b) if sc.analysis.hinf_norm => Some(closed_loop_norm(sc, &b.ctrl).map_err(|e| chain(&e))),
            _ => None,
        })
        .collect();

    let mut report = PerformanceReport::empty(metadata(sc));
    report.disturbances = sc.disturbances.iter().map(|(n, _)| n.clone()).collect();
    let mut cells = cells.into_iter();
    for ((kind, b), norm) in built.iter().zip(norms) {
        let label = kind.label();
        let mut row = ControllerReport { controller: label.to_string(), error: b.as_ref().err().cloned(), hinf_norm: None, cells: Vec::new() };
        row.cells.extend(cells.by_ref().take(sc.disturbances.len()));
        match norm {
            Some(Ok(n)) => {
                let band = sc.expectation(label, NORM_ROW).map(|e| Band::new(e, n.value));
                row.hinf_norm = Some(NormEntry { value: n.value, peak_omega: n.peak_omega, band });
            }
            Some(Err(e)) => row.error = Some(format!("H∞ norm: {e}")),
            None => {}
        }
        report.rows.push(row);
    }
    report
}

pub fn write_report(report: &PerformanceReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv = dir.join("report.csv");
    report.write_csv(BufWriter::new(File::create(&csv).with_context(|| format!("creating {}", csv.display()))?))?;
    let json = dir.join("report.json");
    report.write_json(BufWriter::new(File::create(&json).with_context(|| format!("creating {}", json.display()))?))?;
    Ok(())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LqtSummary {
    pub f: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
    pub s_ff: Vec<Vec<f64>>,
    /// Closed-form optimal tracking cost for the configured reference.
    pub minimal_cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HinfSummary {
    pub gamma: f64,
    pub p1: Vec<Vec<f64>>,
    pub p2: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub l: Vec<Vec<f64>>,
}

impl From<&HinfDesign> for HinfSummary {
    fn from(h: &HinfDesign) -> Self {
        Self { gamma: h.gamma, p1: rows(&h.p1), p2: rows(&h.p2), a: rows(&h.a_inf), b: rows(&h.b_inf), c: rows(&h.c_inf), l: rows(&h.l_inf) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QSummary {
    pub alpha: f64,
    pub aq: Vec<Vec<f64>>,
    pub bq: Vec<Vec<f64>>,
    pub cq: Vec<Vec<f64>>,
    pub dq: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DobcSummary {
    pub f_w: Vec<Vec<f64>>,
    /// `[re, im]` pairs.
    pub error_eigenvalues: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisSummary {
    pub observer: Vec<Vec<f64>>,
    pub lqt: LqtSummary,
    pub gamma_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hinf: Option<HinfSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<QSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dobc: Option<DobcSummary>,
}

pub fn synthesize(sc: &Scenario) -> Result<SynthesisSummary> {
    let plant = &sc.plant;
    let lqt = lqt_synthesize(plant).context("LQ tracking synthesis")?;
    let minimal_cost = lqt_minimal_cost(plant, &lqt, &sc.r)?;
    let gamma_min = hinf_gamma_min(plant, 1e-4)?;
    let gamma = sc.mocc.as_ref().map(|m| m.gamma).or_else(|| sc.hinf.as_ref().map(|h| h.gamma));
    let hinf = gamma.map(|g| hinf_central(plant, g).with_context(|| format!("H∞ synthesis at gamma = {g}"))).transpose()?;
    let q = if sc.mocc.is_some() {
        let (comp, _, _) = mocc_composite(sc)?;
        let q = &comp.q;
        Some(QSummary { alpha: q.alpha, aq: rows(&q.aq), bq: rows(&q.bq), cq: rows(&q.cq), dq: rows(&q.dq) })
    } else {
        None
    };
    let dobc = if sc.dobc.is_some() {
        let d = dobc_design(sc, &lqt)?;
        let mut ev = linalg::eigenvalues(&d.error_matrix(plant))?;
        linalg::sort_eigenvalues(&mut ev);
        Some(DobcSummary { f_w: rows(&d.f_w), error_eigenvalues: ev.iter().map(|z| [z.re, z.im]).collect() })
    } else {
        None
    };
    Ok(SynthesisSummary {
        observer: rows(&sc.observer),
        lqt: LqtSummary { f: rows(&lqt.f), pi: rows(&lqt.pi), s_ff: rows(&lqt.s_ff), minimal_cost },
        gamma_min,
        hinf: hinf.as_ref().map(HinfSummary::from),
        q,
        dobc,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub alpha: f64,
    pub tol: f64,
    pub max_deviation: f64,
    pub worst_omega: f64,
    pub skipped: Vec<f64>,
    pub passes: bool,
}

/// Compare the MOCC composite at `α = 1` against the robust controller.
pub fn verify_q(sc: &Scenario) -> Result<VerifySummary> {
    let (comp, _, gamma) = mocc_composite(sc)?;
    let k = hinf_central(&sc.plant, gamma)?.controller();
    let v = &sc.verify;
    let grid = FrequencyGrid::logspace(v.lo_exp, v.hi_exp, v.count)?;
    let check: TransferCheck = verify_transfer_equality(&comp.with_alpha(1.0), &k, &grid)?;
    Ok(VerifySummary {
        alpha: 1.0,
        tol: v.tol,
        max_deviation: check.max_deviation,
        worst_omega: check.worst_omega,
        passes: check.passes(v.tol) && check.skipped.is_empty(),
        skipped: check.skipped,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NormSummary {
    pub controller: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub spectral_abscissa: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerSummary {
    pub disturbance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terms: Option<PowerTerms>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisSummary {
    pub norms: Vec<NormSummary>,
    pub alpha_sweep: Vec<SweepPoint>,
    pub power: Vec<PowerSummary>,
}

pub fn analyze(sc: &Scenario) -> Result<AnalysisSummary> {
    let norms = sc
        .controllers
        .iter()
        .map(|&k| {
            let res = build(sc, k).and_then(|b| closed_loop_norm(sc, &b.ctrl));
            match res {
                Ok(n) => NormSummary { controller: k.label().into(), value: Some(n.value), peak_omega: Some(n.peak_omega), error: None },
                Err(e) => NormSummary { controller: k.label().into(), value: None, peak_omega: None, error: Some(chain(&e)) },
            }
        })
        .collect();
    let mut alpha_sweep = Vec::new();
    let mut power = Vec::new();
    if sc.mocc.is_some() {
        let (comp, _, _) = mocc_composite(sc)?;
        for &alpha in &sc.analysis.alpha_sweep {
            let abscissa = match assemble_closed_loop(&sc.plant, &comp.with_alpha(alpha)) {
                Ok(cl) => linalg::spectral_abscissa(&cl.a)?,
                Err(mocc_core::Error::Unstable { abscissa, .. }) => abscissa,
                Err(e) => return Err(e.into()),
            };
            alpha_sweep.push(SweepPoint { alpha, spectral_abscissa: abscissa, stable: abscissa < 0.0 });
        }
        let mut b = build(sc, ControllerKind::Mocc)?;
        if b.decomposition.is_none() {
            // The split describes the design point.
            let mut at_one = sc.clone();
            if let Some(m) = at_one.mocc.as_mut() {
                m.alpha = 1.0;
            }
            b = build(&at_one, ControllerKind::Mocc)?;
        }
        for (name, w) in &sc.disturbances {
            match power_terms(sc, &b, w) {
                Ok(terms) => power.push(PowerSummary { disturbance: name.clone(), terms, error: None }),
                Err(e) => power.push(PowerSummary { disturbance: name.clone(), terms: None, error: Some(chain(&e)) }),
            }
        }
    }
    Ok(AnalysisSummary { norms, alpha_sweep, power })
}

/// Simulate one controller against one disturbance and write its trace.
pub fn simulate_one(sc: &Scenario, kind: ControllerKind, disturbance: &str, trace: &Path) -> Result<(f64, f64)> {
    let w = sc.disturbance(disturbance).ok_or_else(|| anyhow!("no disturbance named `{disturbance}`"))?;
    let b = build(sc, kind)?;
    let sm = build_sim_model(&sc.plant, &b.ctrl, &sc.r, w)?;
    let opts = SimOptions::new(sc.simulation.h, sc.simulation.t_end).stride(sc.simulation.trace_stride);
    let tr = run(&sm, &opts)?;
    if let Some(dir) = trace.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    tr.write_csv(BufWriter::new(File::create(trace).with_context(|| format!("creating {}", trace.display()))?))?;
    Ok((tr.cost_z, tr.cost_zm))
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneSummary {
    pub disturbance: String,
    pub iterations: usize,
    pub final_estimate: Option<f64>,
    pub trailing_mean: Option<f64>,
    /// Cost at the trailing mean.
    pub cost_at_estimate: Option<f64>,
}

pub fn tune(sc: &Scenario) -> Result<(TuneTrace, TuneSummary)> {
    let (composite, _, _) = mocc_composite(sc)?;
    let name = match &sc.es.disturbance {
        Some(n) => n.clone(),
        None => sc.disturbances.first().map(|(n, _)| n.clone()).ok_or_else(|| anyhow!("no disturbances configured"))?,
    };
    let w = sc.disturbance(&name).ok_or_else(|| anyhow!("no disturbance named `{name}`"))?.clone();
    let scenario = TuneScenario { plant: sc.plant.clone(), composite, r: sc.r.clone(), w, sim: sim_options(sc, false) };
    let trace = tune_alpha(&scenario, &sc.es_config(), sc.es.iterations)?;
    let mean = trace.trailing_mean(sc.es.window);
    let cost_at_estimate = mean.map(|a| scenario.cost(a)).transpose()?;
    let summary = TuneSummary { disturbance: name, iterations: trace.len(), final_estimate: trace.final_estimate(), trailing_mean: mean, cost_at_estimate };
    Ok((trace, summary))
}
