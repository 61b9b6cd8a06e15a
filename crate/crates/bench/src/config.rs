//! Scenario files.
//!
//! A scenario is a TOML document. Unknown keys are rejected and every
//! validation error names the offending key. The full grammar is documented
//! in the repository README; `examples/double_integrator.cfg` is a complete
//! example.

use std::path::Path;

use mocc_core::es::EsConfig;
use mocc_core::lti::{Plant, StateSpace};
use mocc_core::riccati::{pick_observer_gain, ObserverGainSpec};
use mocc_core::signal::{Channel, SignalSpec, Tone};
use nalgebra::DMatrix;
use serde::Deserialize;

/// Rows of a matrix.
pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("`{key}`: {msg}")]
    Invalid { key: String, msg: String },
}

fn invalid(key: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), msg: msg.into() }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub plant: PlantSection,
    pub observer: ObserverSection,
    pub controllers: ControllersSection,
    pub signals: SignalsSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub es: EsSection,
    #[serde(default)]
    pub expected: Vec<Expectation>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: Rows,
    pub b1: Rows,
    pub b2: Rows,
    pub c1: Rows,
    pub c2: Rows,
    pub d12: Rows,
    pub d21: Rows,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    pub l: Option<Rows>,
    pub dual_care: Option<DualCare>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualCare {
    pub q: Rows,
    pub r: Rows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Mocc,
    Hinf,
    Lqt,
    Dobc,
}

impl ControllerKind {
    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::Mocc => "mocc",
            ControllerKind::Hinf => "hinf",
            ControllerKind::Lqt => "lqt",
            ControllerKind::Dobc => "dobc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Mocc, Self::Hinf, Self::Lqt, Self::Dobc].into_iter().find(|k| k.label() == s)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllersSection {
    pub run: Vec<String>,
    pub mocc: Option<MoccSection>,
    pub hinf: Option<HinfSection>,
    pub dobc: Option<DobcSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MoccMode {
    #[default]
    Shared,
    Static,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoccSection {
    pub gamma: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default)]
    pub mode: MoccMode,
    /// Static nominal gain for `mode = "static"`.
    pub dc: Option<Rows>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HinfFeedforwardKind {
    #[default]
    Game,
    Nominal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HinfSection {
    pub gamma: f64,
    #[serde(default)]
    pub feedforward: HinfFeedforwardKind,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DobcSection {
    pub aw: Rows,
    pub cw: Rows,
    pub l_w: Rows,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneEntry {
    pub amplitude: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub tones: Vec<ToneEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterEntry {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    pub d: Rows,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalEntry {
    pub channels: Vec<ChannelEntry>,
    pub dependency: Option<FilterEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSignal {
    pub name: String,
    pub channels: Vec<ChannelEntry>,
    pub dependency: Option<FilterEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalsSection {
    pub r: SignalEntry,
    pub w: Vec<NamedSignal>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub h: f64,
    pub t_end: f64,
    /// Keep every n-th sample in trace files.
    pub trace_stride: usize,
    pub traces: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { h: 1e-3, t_end: 100.0, trace_stride: 10, traces: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub hinf_norm: bool,
    pub power_norms: bool,
    pub alpha_sweep: Vec<f64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { hinf_norm: true, power_norms: true, alpha_sweep: vec![-10.0, -1.0, 0.0, 0.5, 1.0, 2.0, 10.0] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub lo_exp: f64,
    pub hi_exp: f64,
    pub count: usize,
    pub tol: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { lo_exp: -3.0, hi_exp: 4.0, count: 200, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EsSection {
    pub a: f64,
    pub omega_p: f64,
    pub g: f64,
    pub h_f: f64,
    pub alpha0: f64,
    pub iterations: usize,
    /// Name of the disturbance used for every iteration.
    pub disturbance: Option<String>,
    /// Window of the trailing mean reported as the estimate.
    pub window: usize,
}

impl Default for EsSection {
    fn default() -> Self {
        let d = EsConfig::default();
        Self { a: d.a, omega_p: d.omega_p, g: d.g, h_f: d.h_f, alpha0: d.alpha0, iterations: 100, disturbance: None, window: 20 }
    }
}

/// A reference value with its tolerance band, attached to a report cell.
/// `disturbance = "hinf_norm"` addresses the norm row.
#[derive(Debug, Clone, Deserialize, serde::Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub controller: String,
    pub disturbance: String,
    pub value: f64,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    /// Free text carried into the report next to the band.
    pub note: Option<String>,
}

/// The name of the norm row in reports and expectations.
pub const NORM_ROW: &str = "hinf_norm";

/// Validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: Plant,
    pub observer: DMatrix<f64>,
    pub controllers: Vec<ControllerKind>,
    pub mocc: Option<MoccSection>,
    pub hinf: Option<HinfSection>,
    pub dobc: Option<DobcSection>,
    pub r: SignalSpec,
    pub disturbances: Vec<(String, SignalSpec)>,
    pub simulation: SimulationSection,
    pub analysis: AnalysisSection,
    pub verify: VerifySection,
    pub es: EsSection,
    pub expected: Vec<Expectation>,
}

impl Scenario {
    pub fn disturbance(&self, name: &str) -> Option<&SignalSpec> {
        self.disturbances.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn es_config(&self) -> EsConfig {
        let e = &self.es;
        EsConfig { a: e.a, omega_p: e.omega_p, g: e.g, h_f: e.h_f, alpha0: e.alpha0 }
    }

    pub fn expectation(&self, controller: &str, disturbance: &str) -> Option<&Expectation> {
        self.expected.iter().find(|e| e.controller == controller && e.disturbance == disturbance)
    }
}

pub fn matrix(key: &str, rows: &Rows) -> Result<DMatrix<f64>, ConfigError> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(invalid(key, "rows have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid(key, "entries must be finite"));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn filter(key: &str, f: &FilterEntry) -> Result<StateSpace, ConfigError> {
    let m = |k: &str, r: &Rows| matrix(&format!("{key}.{k}"), r);
    StateSpace::new(m("a", &f.a)?, m("b", &f.b)?, m("c", &f.c)?, m("d", &f.d)?).map_err(|e| invalid(key, e.to_string()))
}

fn signal(key: &str, channels: &[ChannelEntry], dep: Option<&FilterEntry>, width: usize) -> Result<SignalSpec, ConfigError> {
    if channels.len() != width {
        return Err(invalid(format!("{key}.channels"), format!("expected {width} channels, found {}", channels.len())));
    }
    let chans = channels
        .iter()
        .map(|c| Channel::new(c.offset, c.tones.iter().map(|t| Tone { amplitude: t.amplitude, omega: t.omega, phase: t.phase }).collect()))
        .collect();
    let mut s = SignalSpec::new(chans).map_err(|e| invalid(format!("{key}.channels"), e.to_string()))?;
    if let Some(f) = dep {
        let key = format!("{key}.dependency");
        s = s.with_dependency(filter(&key, f)?).map_err(|e| invalid(key, e.to_string()))?;
    }
    Ok(s)
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn validate(self) -> Result<Scenario, ConfigError> {
        let p = &self.plant;
        let m = |k: &str, r: &Rows| matrix(&format!("plant.{k}"), r);
        let plant = Plant::new(m("a", &p.a)?, m("b1", &p.b1)?, m("b2", &p.b2)?, m("c1", &p.c1)?, m("c2", &p.c2)?, m("d12", &p.d12)?, m("d21", &p.d21)?)
            .map_err(|e| invalid("plant", e.to_string()))?;

        let spec = match (&self.observer.l, &self.observer.dual_care) {
            (Some(l), None) => ObserverGainSpec::Explicit(matrix("observer.l", l)?),
            (None, Some(d)) => ObserverGainSpec::DualCare { q: matrix("observer.dual_care.q", &d.q)?, r: matrix("observer.dual_care.r", &d.r)? },
            _ => return Err(invalid("observer", "give exactly one of `l` or `dual_care`")),
        };
        let observer = pick_observer_gain(&plant, &spec).map_err(|e| invalid("observer", e.to_string()))?;

        let mut controllers = Vec::new();
        for name in &self.controllers.run {
            let kind = ControllerKind::parse(name)
                .ok_or_else(|| invalid("controllers.run", format!("unknown controller kind `{name}` (expected mocc, hinf, lqt or dobc)")))?;
            if controllers.contains(&kind) {
                return Err(invalid("controllers.run", format!("`{name}` listed twice")));
            }
            controllers.push(kind);
        }
        let c = &self.controllers;
        if controllers.contains(&ControllerKind::Mocc) && c.mocc.is_none() {
            return Err(invalid("controllers.mocc", "missing section for a requested controller"));
        }
        if controllers.contains(&ControllerKind::Hinf) && c.hinf.is_none() {
            return Err(invalid("controllers.hinf", "missing section for a requested controller"));
        }
        if controllers.contains(&ControllerKind::Dobc) && c.dobc.is_none() {
            return Err(invalid("controllers.dobc", "missing section for a requested controller"));
        }
        if let Some(mc) = &c.mocc {
            positive("controllers.mocc.gamma", mc.gamma)?;
            if !mc.alpha.is_finite() {
                return Err(invalid("controllers.mocc.alpha", "must be finite"));
            }
            match (mc.mode, &mc.dc) {
                (MoccMode::Static, None) => return Err(invalid("controllers.mocc.dc", "required when mode = \"static\"")),
                (_, Some(dc)) => {
                    matrix("controllers.mocc.dc", dc)?;
                }
                _ => {}
            }
        }
        if let Some(h) = &c.hinf {
            positive("controllers.hinf.gamma", h.gamma)?;
        }
        if let Some(d) = &c.dobc {
            matrix("controllers.dobc.aw", &d.aw)?;
            matrix("controllers.dobc.cw", &d.cw)?;
            matrix("controllers.dobc.l_w", &d.l_w)?;
        }

        let r = signal("signals.r", &self.signals.r.channels, self.signals.r.dependency.as_ref(), plant.p2())?;
        if r.dependency().is_some() {
            return Err(invalid("signals.r.dependency", "the reference cannot depend on another signal"));
        }
        let mut disturbances: Vec<(String, SignalSpec)> = Vec::new();
        for (i, w) in self.signals.w.iter().enumerate() {
            let key = format!("signals.w[{i}]");
            if w.name.is_empty() || !w.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-') {
                return Err(invalid(format!("{key}.name"), "names use letters, digits, '_' and '-'"));
            }
            if w.name == NORM_ROW || disturbances.iter().any(|(n, _)| n == &w.name) {
                return Err(invalid(format!("{key}.name"), format!("`{}` is reserved or already used", w.name)));
            }
            disturbances.push((w.name.clone(), signal(&key, &w.channels, w.dependency.as_ref(), plant.m1())?));
        }

        let s = &self.simulation;
        positive("simulation.h", s.h)?;
        positive("simulation.t_end", s.t_end)?;
        if s.h > s.t_end {
            return Err(invalid("simulation.h", "step exceeds the horizon"));
        }
        if s.trace_stride == 0 {
            return Err(invalid("simulation.trace_stride", "must be at least 1"));
        }
        let v = &self.verify;
        if v.count < 2 || !(v.lo_exp < v.hi_exp) {
            return Err(invalid("verify", "need count >= 2 and lo_exp < hi_exp"));
        }
        positive("verify.tol", v.tol)?;
        if let Some(d) = &self.es.disturbance {
            if !disturbances.iter().any(|(n, _)| n == d) {
                return Err(invalid("es.disturbance", format!("no disturbance named `{d}`")));
            }
        }
        if self.es.window == 0 {
            return Err(invalid("es.window", "must be at least 1"));
        }
        mocc_core::es::EsState::new(&EsConfig { a: self.es.a, omega_p: self.es.omega_p, g: self.es.g, h_f: self.es.h_f, alpha0: self.es.alpha0 })
            .map_err(|e| invalid("es", e.to_string()))?;
        for (i, e) in self.expected.iter().enumerate() {
            let key = format!("expected[{i}]");
            if ControllerKind::parse(&e.controller).is_none() {
                return Err(invalid(format!("{key}.controller"), format!("unknown controller kind `{}`", e.controller)));
            }
            if e.disturbance != NORM_ROW && !disturbances.iter().any(|(n, _)| n == &e.disturbance) {
                return Err(invalid(format!("{key}.disturbance"), format!("no disturbance named `{}`", e.disturbance)));
            }
            if e.rel_tol.is_none() == e.abs_tol.is_none() {
                return Err(invalid(key, "give exactly one of `rel_tol` or `abs_tol`"));
            }
        }

        Ok(Scenario {
            plant,
            observer,
            controllers,
            mocc: self.controllers.mocc,
            hinf: self.controllers.hinf,
            dobc: self.controllers.dobc,
            r,
            disturbances,
            simulation: self.simulation,
            analysis: self.analysis,
            verify: self.verify,
            es: self.es,
            expected: self.expected,
        })
    }
}

pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    ScenarioFile::parse(text)?.validate()
}

pub fn load_config(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}
