//! Comparison controllers: disturbance-observer-based control (DOBC) and
//! H∞ output feedback with a tracking feedforward.

use nalgebra::DMatrix;

use crate::controller::{Layout, LoopController};
use crate::error::{Error, Result};
use crate::feedforward::AnticausalFeedforward;
use crate::linalg::{self, block, vstack, zeros};
use crate::lti::Plant;
use crate::riccati::{hinf_central, HinfDesign, LqtDesign};

/// `F_w = -[C2 (A + B2 F)^{-1} B2]^{-1} C2 (A + B2 F)^{-1} B1`, the static
/// gain that cancels a constant matched disturbance at the output.
pub fn dobc_compensation_gain(plant: &Plant, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let af = plant.a() + plant.b2() * f;
    if !linalg::is_stable(&af)? {
        return Err(Error::Unstable { what: "A + B2 F".into(), abscissa: linalg::spectral_abscissa(&af)? });
    }
    let g2 = plant.c2() * linalg::solve(&af, plant.b2(), "A + B2 F")?;
    let g1 = plant.c2() * linalg::solve(&af, plant.b1(), "A + B2 F")?;
    if g2.nrows() != g2.ncols() {
        return Err(Error::Dimension("C2 (A + B2 F)^{-1} B2 must be square".into()));
    }
    Ok(-linalg::solve(&g2, &g1, "C2 (A + B2 F)^{-1} B2 (transmission zero at s = 0)")?)
}

/// Joint state and disturbance observer with disturbance model
/// `ξ' = A_w ξ`, `w = C_w ξ`, state feedback and LQ tracking feedforward.
#[derive(Debug, Clone, PartialEq)]
pub struct DobcDesign {
    pub aw: DMatrix<f64>,
    pub cw: DMatrix<f64>,
    pub l_chi: DMatrix<f64>,
    pub l_w: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub f_w: DMatrix<f64>,
    pub lqt: LqtDesign,
}

impl DobcDesign {
    /// Estimation error dynamics for `[χ - χ̂; ξ - ξ̂]`.
    pub fn error_matrix(&self, plant: &Plant) -> DMatrix<f64> {
        let d21cw = plant.d21() * &self.cw;
        block(&[
            &[&(plant.a() + &self.l_chi * plant.c2()), &(plant.b1() * &self.cw + &self.l_chi * &d21cw)],
            &[&(&self.l_w * plant.c2()), &(&self.aw + &self.l_w * &d21cw)],
        ])
    }

    /// `u = F χ̂ + F_w C_w ξ̂ + φ` with `u_c = F χ̂ + φ`, `u_q = F_w C_w ξ̂`
    /// and residual `f = ŷ - y`.
    pub fn controller(&self, plant: &Plant) -> Result<LoopController> {
        let (n, m2, p2) = (plant.n(), plant.m2(), plant.p2());
        let nw = self.aw.nrows();
        let lay = Layout::new(&[n, nw, p2, p2, m2]);
        let (chi, xi, y, phi) = (lay.sel(0), lay.sel(1), lay.sel(2), lay.sel(4));
        let what = &self.cw * &xi;
        let yhat = plant.c2() * &chi + plant.d21() * &what;
        let fres = &yhat - &y;
        let uc = &self.f * &chi + &phi;
        let uq = &self.f_w * &what;
        let u = &uc + &uq;
        let chi_dot = plant.a() * &chi + plant.b1() * &what + plant.b2() * &u + &self.l_chi * &fres;
        let xi_dot = &self.aw * &xi + &self.l_w * &fres;
        let sys = lay.state_space(&vstack(&[&chi_dot, &xi_dot]), &vstack(&[&u, &uc, &uq, &fres]), 2)?;
        let ff = AnticausalFeedforward::lqt(plant, &self.lqt)?;
        LoopController::new("dobc", sys, p2, m2, Some(ff))
    }
}

pub fn dobc_synthesize(
    plant: &Plant,
    aw: &DMatrix<f64>,
    cw: &DMatrix<f64>,
    l_chi: &DMatrix<f64>,
    l_w: &DMatrix<f64>,
    lqt: &LqtDesign,
) -> Result<DobcDesign> {
    let (n, m1, p2) = (plant.n(), plant.m1(), plant.p2());
    let nw = aw.nrows();
    if aw.ncols() != nw || cw.shape() != (m1, nw) || l_chi.shape() != (n, p2) || l_w.shape() != (nw, p2) {
        return Err(Error::Dimension("DOBC blocks: A_w nw x nw, C_w m1 x nw, L_chi n x p2, L_w nw x p2".into()));
    }
    let f_w = dobc_compensation_gain(plant, &lqt.f)?;
    let design = DobcDesign {
        aw: aw.clone(),
        cw: cw.clone(),
        l_chi: l_chi.clone(),
        l_w: l_w.clone(),
        f: lqt.f.clone(),
        f_w,
        lqt: lqt.clone(),
    };
    let em = design.error_matrix(plant);
    if !linalg::is_stable(&em)? {
        return Err(Error::Unstable { what: "DOBC error matrix".into(), abscissa: linalg::spectral_abscissa(&em)? });
    }
    Ok(design)
}

/// Which matrix drives the anticausal feedforward of the H∞ tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HinfFeedforward {
    /// `b' = -(A + B2 C∞ + γ^{-2} B1 B1' P1)' b + S∞ r`, the worst-case
    /// closed loop of the control game.
    #[default]
    GameTheoretic,
    /// `b' = -(A + B2 C∞)' b + S∞ r`.
    Nominal,
}

/// Central H∞ controller plus an LQ-style anticausal feedforward built
/// from `P1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HinfTrackingDesign {
    pub hinf: HinfDesign,
    pub variant: HinfFeedforward,
    /// `S∞ = C2'C1'C1 - (P1 B2 + C2'C1'D12) R1^{-1} D12'C1`
    pub s_inf: DMatrix<f64>,
    pub feedforward: AnticausalFeedforward,
}

impl HinfTrackingDesign {
    /// `x∞' = A∞ x∞ + B∞ y + B2 φ`, `u = C∞ x∞ + φ`, `f = C2 x∞ - y`.
    pub fn controller(&self, plant: &Plant) -> Result<LoopController> {
        let (n, m2, p2) = (plant.n(), plant.m2(), plant.p2());
        let h = &self.hinf;
        let lay = Layout::new(&[n, p2, p2, m2]);
        let (x, y, phi) = (lay.sel(0), lay.sel(1), lay.sel(3));
        let uc = &h.c_inf * &x + &phi;
        let uq = zeros(m2, lay.total());
        let fres = plant.c2() * &x - &y;
        let xdot = &h.a_inf * &x + &h.b_inf * &y + plant.b2() * &phi;
        let sys = lay.state_space(&xdot, &vstack(&[&uc, &uc, &uq, &fres]), 1)?;
        LoopController::new("hinf-tracking", sys, p2, m2, Some(self.feedforward.clone()))
    }
}

pub fn hinf_tracking_synthesize(plant: &Plant, gamma: f64) -> Result<HinfTrackingDesign> {
    hinf_tracking_synthesize_with(plant, gamma, HinfFeedforward::default())
}

pub fn hinf_tracking_synthesize_with(plant: &Plant, gamma: f64, variant: HinfFeedforward) -> Result<HinfTrackingDesign> {
    let hinf = hinf_central(plant, gamma)?;
    let r1 = plant.r1();
    let c1c2 = plant.c1c2();
    let d12t_c1 = plant.d12().transpose() * plant.c1();
    let pb = &hinf.p1 * plant.b2() + c1c2.transpose() * plant.d12();
    let s_inf = plant.c2().transpose() * plant.c1().transpose() * plant.c1() - &pb * linalg::solve(&r1, &d12t_c1, "R1")?;
    let mut m = plant.a() + plant.b2() * &hinf.c_inf;
    if variant == HinfFeedforward::GameTheoretic {
        m += plant.b1() * plant.b1().transpose() * &hinf.p1 / (gamma * gamma);
    }
    let out_b = -linalg::solve(&r1, &plant.b2().transpose(), "R1")?;
    let out_r = linalg::solve(&r1, &d12t_c1, "R1")?;
    let feedforward = AnticausalFeedforward::new(m, s_inf.clone(), out_b, out_r)?;
    Ok(HinfTrackingDesign { hinf, variant, s_inf, feedforward })
}
