//! Anticausal feedforward for tracking: the costate-like signal `b` solves
//! `b' = -M' b + S r` backwards in time and is evaluated on its unique
//! bounded trajectory in closed form.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, hstack, zeros};
use crate::lti::{Plant, StateSpace};
use crate::riccati::LqtDesign;
use crate::signal::{SignalSpec, Spectrum};

/// `b' = -M' b + S r`, `φ = out_b b + out_r r` with `M` Hurwitz.
#[derive(Debug, Clone, PartialEq)]
pub struct AnticausalFeedforward {
    /// Stable matrix whose negated transpose drives `b`.
    pub m: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub out_b: DMatrix<f64>,
    pub out_r: DMatrix<f64>,
}

impl AnticausalFeedforward {
    pub fn new(m: DMatrix<f64>, s: DMatrix<f64>, out_b: DMatrix<f64>, out_r: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n || s.nrows() != n || out_b.ncols() != n || out_r.ncols() != s.ncols() || out_r.nrows() != out_b.nrows() {
            return Err(Error::Dimension("inconsistent feedforward blocks".into()));
        }
        if !linalg::is_stable(&m)? {
            return Err(Error::Unstable { what: "feedforward matrix M".into(), abscissa: linalg::spectral_abscissa(&m)? });
        }
        Ok(Self { m, s, out_b, out_r })
    }

    /// LQ tracking feedforward `φ = -R1^{-1} B2' b + R1^{-1} D12' C1 r` with `M = A + B2 F`.
    pub fn lqt(plant: &Plant, lqt: &LqtDesign) -> Result<Self> {
        let m = plant.a() + plant.b2() * &lqt.f;
        let out_b = -linalg::solve(&lqt.r1, &plant.b2().transpose(), "R1")?;
        let out_r = linalg::solve(&lqt.r1, &lqt.d12t_c1, "R1")?;
        Self::new(m, lqt.s_ff.clone(), out_b, out_r)
    }

    pub fn nstates(&self) -> usize {
        self.m.nrows()
    }

    pub fn ninputs(&self) -> usize {
        self.s.ncols()
    }

    pub fn noutputs(&self) -> usize {
        self.out_b.nrows()
    }

    /// The anti-stable system `r -> b`. Its frequency response gives the
    /// bounded (two-sided) solution.
    pub fn b_system(&self) -> StateSpace {
        let n = self.nstates();
        StateSpace::new(-self.m.transpose(), self.s.clone(), DMatrix::identity(n, n), zeros(n, self.ninputs()))
            .expect("blocks checked in constructor")
    }

    /// The anti-stable system `r -> φ`.
    pub fn system(&self) -> StateSpace {
        StateSpace::new(-self.m.transpose(), self.s.clone(), self.out_b.clone(), self.out_r.clone())
            .expect("blocks checked in constructor")
    }

    /// Phasors `β = (jωI + M')^{-1} S v` of the bounded `b`.
    pub fn b_spectrum(&self, r: &Spectrum) -> Result<Spectrum> {
        r.through(&self.b_system())
    }

    pub fn output_spectrum(&self, r: &Spectrum) -> Result<Spectrum> {
        r.through(&self.system())
    }
}

/// Closed-form bounded trajectory of `b` for a given reference.
#[derive(Debug, Clone, PartialEq)]
pub struct BTrajectory {
    pub spectrum: Spectrum,
}

impl BTrajectory {
    pub fn eval(&self, t: f64) -> nalgebra::DVector<f64> {
        self.spectrum.eval(t)
    }

    pub fn derivative(&self, t: f64) -> nalgebra::DVector<f64> {
        self.spectrum.derivative().eval(t)
    }
}

/// Bounded solution of `b' = -(A + B2 F)' b + S r` for `r` built from
/// constants and sinusoids. `af` is the stable matrix `A + B2 F`.
pub fn anticausal_feedforward(af: &DMatrix<f64>, s_ff: &DMatrix<f64>, r: &SignalSpec) -> Result<BTrajectory> {
    let n = af.nrows();
    let ff = AnticausalFeedforward::new(af.clone(), s_ff.clone(), DMatrix::identity(n, n), zeros(n, s_ff.ncols()))?;
    if r.dependency().is_some() {
        return Err(Error::Signal("reference must be an independent signal".into()));
    }
    Ok(BTrajectory { spectrum: ff.b_spectrum(&r.spectrum())? })
}

/// Long-run average of `c(τ) = ‖C1 r‖² - ‖R1^{-1/2}(B2' b - D12' C1 r)‖²`,
/// the optimal tracking cost for the noise-free plant.
pub fn lqt_minimal_cost(plant: &Plant, lqt: &LqtDesign, r: &SignalSpec) -> Result<f64> {
    let m = plant.a() + plant.b2() * &lqt.f;
    let rs = r.spectrum();
    let b = anticausal_feedforward(&m, &lqt.s_ff, r)?.spectrum;
    let chol = lqt.r1.clone().cholesky().ok_or_else(|| Error::Singular("R1 is not positive definite".into()))?;
    let li = linalg::inverse(&chol.l(), "Cholesky factor of R1")?;
    let c1r = rs.map_matrix(plant.c1());
    // Stack [b; r] and apply L^{-1} [B2', -D12'C1].
    let g = &li * hstack(&[&plant.b2().transpose(), &(-&lqt.d12t_c1)]);
    let q = b.stack(&rs).map_matrix(&g);
    Ok(c1r.power() - q.power())
}
