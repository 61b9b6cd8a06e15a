//! Bounded-power signals built from constants and finite sums of sinusoids,
//! and their line spectra.
//!
//! A signal is represented exactly by a [`Spectrum`]:
//! `s(t) = dc + Σ_k Im(v_k e^{jω_k t})`, with one complex phasor vector per
//! distinct positive frequency. A tone `a·sin(ωt + φ)` has phasor `a e^{jφ}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::lti::StateSpace;

/// `amplitude * sin(omega * t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub amplitude: f64,
    /// rad/s
    pub omega: f64,
    /// rad
    pub phase: f64,
}

impl Tone {
    pub fn sine(amplitude: f64, omega: f64) -> Self {
        Self { amplitude, omega, phase: 0.0 }
    }
}

/// One scalar channel: a constant offset plus tones at distinct frequencies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Channel {
    pub offset: f64,
    pub tones: Vec<Tone>,
}

impl Channel {
    pub fn new(offset: f64, tones: Vec<Tone>) -> Self {
        Self { offset, tones }
    }
}

/// Two frequencies closer than this (relative) are treated as equal.
const FREQ_TOL: f64 = 1e-12;

fn same_frequency(a: f64, b: f64) -> bool {
    (a - b).abs() <= FREQ_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Multichannel constant-plus-sinusoid signal, optionally with a dependent
/// part `W(r)` produced by an LTI filter acting on a reference signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    channels: Vec<Channel>,
    dependency: Option<StateSpace>,
}

impl SignalSpec {
    pub fn new(channels: Vec<Channel>) -> Result<Self> {
        for (i, ch) in channels.iter().enumerate() {
            if !ch.offset.is_finite() {
                return Err(Error::Signal(format!("channel {i}: non-finite offset")));
            }
            for t in &ch.tones {
                if !(t.amplitude.is_finite() && t.omega.is_finite() && t.phase.is_finite()) {
                    return Err(Error::Signal(format!("channel {i}: non-finite tone")));
                }
                if t.omega < 0.0 {
                    return Err(Error::Signal(format!("channel {i}: negative frequency {}", t.omega)));
                }
            }
            for (j, a) in ch.tones.iter().enumerate() {
                if ch.tones[..j].iter().any(|b| same_frequency(a.omega, b.omega)) {
                    return Err(Error::Signal(format!(
                        "channel {i}: frequency {} appears more than once; merge the tones first",
                        a.omega
                    )));
                }
            }
        }
        Ok(Self { channels, dependency: None })
    }

    /// The identically zero signal of the given width.
    pub fn zero(width: usize) -> Self {
        Self { channels: vec![Channel::default(); width], dependency: None }
    }

    /// Single-channel signal.
    pub fn scalar(offset: f64, tones: Vec<Tone>) -> Result<Self> {
        Self::new(vec![Channel::new(offset, tones)])
    }

    /// Add a dependent part `W(r)`; `filter` maps the reference to this
    /// signal's channels.
    pub fn with_dependency(mut self, filter: StateSpace) -> Result<Self> {
        if filter.noutputs() != self.width() {
            return Err(Error::Dimension(format!(
                "dependency filter has {} outputs, signal has {} channels",
                filter.noutputs(),
                self.width()
            )));
        }
        self.dependency = Some(filter);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn dependency(&self) -> Option<&StateSpace> {
        self.dependency.as_ref()
    }

    /// Line spectrum of the independent part.
    pub fn spectrum(&self) -> Spectrum {
        let n = self.width();
        let mut s = Spectrum::zero(n);
        for (i, ch) in self.channels.iter().enumerate() {
            s.dc[i] += ch.offset;
            for t in &ch.tones {
                if t.omega == 0.0 {
                    s.dc[i] += t.amplitude * t.phase.sin();
                } else {
                    let mut v = DVector::zeros(n);
                    v[i] = C64::from_polar(t.amplitude, t.phase);
                    s.add_line(t.omega, v);
                }
            }
        }
        s
    }

    /// Full spectrum including the bounded (two-sided) response `W(jω) r`.
    pub fn spectrum_with_reference(&self, r: &SignalSpec) -> Result<Spectrum> {
        let mut s = self.spectrum();
        if let Some(w) = &self.dependency {
            if w.ninputs() != r.width() {
                return Err(Error::Dimension("dependency filter input width differs from the reference".into()));
            }
            s = s.plus(&r.spectrum().through(w)?)?;
        }
        Ok(s)
    }

    /// Frequencies present in the independent part (0 for a non-zero constant).
    pub fn frequencies(&self) -> Vec<f64> {
        self.spectrum().frequencies()
    }
}

/// Exact value of the independent part at time `t`. A dependent part is
/// stateful and is produced by the integrator, not here.
pub fn sample_signal(s: &SignalSpec, t: f64) -> DVector<f64> {
    let mut out = DVector::zeros(s.width());
    for (i, ch) in s.channels.iter().enumerate() {
        out[i] = ch.offset + ch.tones.iter().map(|tn| tn.amplitude * (tn.omega * t + tn.phase).sin()).sum::<f64>();
    }
    out
}

/// One spectral line: `Im(phasor e^{jωt})`, `ω > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub omega: f64,
    pub phasor: DVector<C64>,
}

/// Line spectrum `dc + Σ Im(v_k e^{jω_k t})`, lines sorted by frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub dc: DVector<f64>,
    pub lines: Vec<Line>,
}

impl Spectrum {
    pub fn zero(width: usize) -> Self {
        Self { dc: DVector::zeros(width), lines: Vec::new() }
    }

    pub fn width(&self) -> usize {
        self.dc.len()
    }

    fn add_line(&mut self, omega: f64, v: DVector<C64>) {
        match self.lines.iter_mut().find(|l| same_frequency(l.omega, omega)) {
            Some(l) => l.phasor += v,
            None => {
                self.lines.push(Line { omega, phasor: v });
                self.lines.sort_by(|a, b| a.omega.total_cmp(&b.omega));
            }
        }
    }

    /// Frequencies carrying non-zero content (0 stands for the constant part).
    pub fn frequencies(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if self.dc.iter().any(|&x| x != 0.0) {
            out.push(0.0);
        }
        out.extend(self.lines.iter().filter(|l| l.phasor.iter().any(|z| *z != C64::new(0.0, 0.0))).map(|l| l.omega));
        out
    }

    /// First frequency with content in both spectra.
    pub fn shared_frequency(&self, other: &Spectrum) -> Option<f64> {
        let theirs = other.frequencies();
        self.frequencies().into_iter().find(|w| theirs.iter().any(|v| same_frequency(*w, *v)))
    }

    /// Mean-square value `‖dc‖² + Σ ‖v_k‖²/2`.
    pub fn power(&self) -> f64 {
        self.dc.norm_squared() + self.lines.iter().map(|l| 0.5 * l.phasor.norm_squared()).sum::<f64>()
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let mut out = self.dc.clone();
        self.add_lines(t, &mut out);
        out
    }

    /// Evaluate into a preallocated buffer.
    pub fn eval_into(&self, t: f64, out: &mut DVector<f64>) {
        out.copy_from(&self.dc);
        self.add_lines(t, out);
    }

    fn add_lines(&self, t: f64, out: &mut DVector<f64>) {
        for l in &self.lines {
            let (s, c) = (l.omega * t).sin_cos();
            for i in 0..out.len() {
                let v = l.phasor[i];
                out[i] += v.re * s + v.im * c;
            }
        }
    }

    /// Time derivative of the represented signal.
    pub fn derivative(&self) -> Spectrum {
        Spectrum {
            dc: DVector::zeros(self.width()),
            lines: self
                .lines
                .iter()
                .map(|l| Line { omega: l.omega, phasor: l.phasor.map(|z| z * C64::new(0.0, l.omega)) })
                .collect(),
        }
    }

    pub fn plus(&self, other: &Spectrum) -> Result<Spectrum> {
        if self.width() != other.width() {
            return Err(Error::Dimension("adding spectra of different widths".into()));
        }
        let mut out = self.clone();
        out.dc += &other.dc;
        for l in &other.lines {
            out.add_line(l.omega, l.phasor.clone());
        }
        Ok(out)
    }

    /// Channel-wise concatenation `[self; other]`.
    pub fn stack(&self, other: &Spectrum) -> Spectrum {
        let (n1, n2) = (self.width(), other.width());
        let mut out = Spectrum::zero(n1 + n2);
        out.dc.rows_mut(0, n1).copy_from(&self.dc);
        out.dc.rows_mut(n1, n2).copy_from(&other.dc);
        for l in &self.lines {
            let mut v = DVector::zeros(n1 + n2);
            v.rows_mut(0, n1).copy_from(&l.phasor);
            out.add_line(l.omega, v);
        }
        for l in &other.lines {
            let mut v = DVector::zeros(n1 + n2);
            v.rows_mut(n1, n2).copy_from(&l.phasor);
            out.add_line(l.omega, v);
        }
        out
    }

    /// Apply a constant real matrix channel-wise.
    pub fn map_matrix(&self, m: &DMatrix<f64>) -> Spectrum {
        let mc: CMatrix = m.map(|x| C64::new(x, 0.0));
        Spectrum {
            dc: m * &self.dc,
            lines: self.lines.iter().map(|l| Line { omega: l.omega, phasor: &mc * &l.phasor }).collect(),
        }
    }

    /// Steady-state (bounded, two-sided) response of `sys` to this signal.
    /// Needs only that no pole of `sys` sits at a frequency of the signal.
    pub fn through(&self, sys: &StateSpace) -> Result<Spectrum> {
        if sys.ninputs() != self.width() {
            return Err(Error::Dimension(format!(
                "system takes {} inputs, signal has {} channels",
                sys.ninputs(),
                self.width()
            )));
        }
        self.through_fn(sys.noutputs(), |s| sys.eval(s))
    }

    /// Same as [`Spectrum::through`] for a transfer matrix given pointwise.
    pub fn through_fn(&self, outputs: usize, mut h: impl FnMut(C64) -> Result<CMatrix>) -> Result<Spectrum> {
        let mut out = Spectrum::zero(outputs);
        if self.dc.iter().any(|&x| x != 0.0) {
            let g = h(C64::new(0.0, 0.0))?;
            let v = &g * self.dc.map(|x| C64::new(x, 0.0));
            if v.iter().any(|z| z.im.abs() > 1e-9 * (1.0 + z.norm())) {
                return Err(Error::Signal("DC gain of a real system came out complex".into()));
            }
            out.dc = v.map(|z| z.re);
        }
        for l in &self.lines {
            let g = h(C64::new(0.0, l.omega))?;
            out.lines.push(Line { omega: l.omega, phasor: &g * &l.phasor });
        }
        Ok(out)
    }
}

/// `‖s‖_P` in closed form; signals with a dependent part need a reference,
/// see [`power_norm_signal_given`].
pub fn power_norm_signal(s: &SignalSpec) -> Result<f64> {
    if s.dependency.is_some() {
        return Err(Error::Signal("signal depends on a reference; use power_norm_signal_given".into()));
    }
    Ok(s.spectrum().power().sqrt())
}

pub fn power_norm_signal_given(s: &SignalSpec, r: &SignalSpec) -> Result<f64> {
    Ok(s.spectrum_with_reference(r)?.power().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn samples() {
        let r = SignalSpec::scalar(0.0, vec![Tone::sine(1.0, PI)]).unwrap();
        assert!((sample_signal(&r, 0.5)[0] - 1.0).abs() < 1e-15);
        let w2 = SignalSpec::scalar(1.0, vec![Tone::sine(1.0, 4.0 * PI), Tone::sine(1.0, 0.2 * PI)]).unwrap();
        assert_eq!(sample_signal(&w2, 0.0)[0], 1.0);
        let w1 = SignalSpec::scalar(0.0, vec![Tone::sine(1.0, 1.5 * PI)]).unwrap();
        assert!((sample_signal(&w1, 1.0 / 3.0)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_power() {
        let r = SignalSpec::scalar(0.0, vec![Tone::sine(1.0, PI)]).unwrap();
        assert!((power_norm_signal(&r).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let w2 = SignalSpec::scalar(1.0, vec![Tone::sine(1.0, 4.0 * PI), Tone::sine(1.0, 0.2 * PI)]).unwrap();
        assert!((power_norm_signal(&w2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn duplicate_frequency_is_rejected() {
        let e = SignalSpec::scalar(0.0, vec![Tone::sine(1.0, 2.0), Tone::sine(0.5, 2.0)]);
        assert!(matches!(e, Err(Error::Signal(_))));
    }

    #[test]
    fn spectrum_evaluates_like_sampler() {
        let s = SignalSpec::new(vec![
            Channel::new(0.3, vec![Tone { amplitude: 2.0, omega: 1.1, phase: 0.4 }]),
            Channel::new(-1.0, vec![Tone::sine(0.5, 1.1), Tone { amplitude: 1.0, omega: 0.0, phase: 0.2 }]),
        ])
        .unwrap();
        let sp = s.spectrum();
        for &t in &[0.0, 0.37, 5.2] {
            assert!((sp.eval(t) - sample_signal(&s, t)).norm() < 1e-14);
        }
    }
}
