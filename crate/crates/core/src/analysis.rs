//! Closed-loop assembly, the split of the performance output into a
//! disturbance part and a reference part, H∞ norms, and power seminorms of
//! bounded-power signals and responses.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::controller::{Layout, LoopController};
use crate::error::{Error, Result};
use crate::feedforward::AnticausalFeedforward;
use crate::linalg::{self, block, eye, hstack, vstack, zeros, CMatrix, C64};
use crate::lti::{Plant, StateSpace};
use crate::signal::{SignalSpec, Spectrum};
use crate::youla::{loop_matrix, CompositeController};

/// Named output groups of a [`LoopModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopOutput {
    /// `z = C1(C2 x - r) + D12 u`
    Z,
    /// `z_m = C1(y - r) + D12 u`
    Zm,
    Y,
    U,
    Uc,
    Uq,
    F,
    W,
}

/// Plant in feedback with a [`LoopController`]: states `[x; ξ]`, inputs
/// `[w; r; φ]`, outputs `[z; z_m; y; u; u_c; u_q; f; w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub n_plant: usize,
    pub m1: usize,
    pub p1: usize,
    pub p2: usize,
    pub m2: usize,
    pub nf: usize,
    pub feedforward: Option<AnticausalFeedforward>,
}

impl LoopModel {
    pub fn nstates(&self) -> usize {
        self.a.nrows()
    }

    pub fn w_cols(&self) -> Range<usize> {
        0..self.m1
    }

    pub fn r_cols(&self) -> Range<usize> {
        self.m1..self.m1 + self.p2
    }

    pub fn phi_cols(&self) -> Range<usize> {
        self.m1 + self.p2..self.m1 + self.p2 + self.m2
    }

    pub fn rows(&self, o: LoopOutput) -> Range<usize> {
        let sizes = [self.p1, self.p1, self.p2, self.m2, self.m2, self.m2, self.nf, self.m1];
        let idx = o as usize;
        let start: usize = sizes[..idx].iter().sum();
        start..start + sizes[idx]
    }

    /// Replace the disturbance input by `w = w_ind + W(r)`; appends the
    /// filter states and keeps the input layout `[w_ind; r; φ]`.
    pub fn with_dependency(&self, wf: &StateSpace) -> Result<LoopModel> {
        if wf.ninputs() != self.p2 || wf.noutputs() != self.m1 {
            return Err(Error::Dimension("dependency filter must map r to w".into()));
        }
        let n = self.nstates();
        let nw = wf.nstates();
        let bw = self.b.columns(self.w_cols().start, self.m1).into_owned();
        let dw = self.d.columns(self.w_cols().start, self.m1).into_owned();
        let a = block(&[&[&self.a, &(&bw * wf.c())], &[&zeros(nw, n), wf.a()]]);
        let mut b = vstack(&[&self.b, &zeros(nw, self.b.ncols())]);
        {
            let r0 = self.r_cols().start;
            let mut top = b.view_mut((0, r0), (n, self.p2));
            top += &bw * wf.d();
            b.view_mut((n, r0), (nw, self.p2)).copy_from(wf.b());
        }
        let c = hstack(&[&self.c, &(&dw * wf.c())]);
        let mut d = self.d.clone();
        {
            let r0 = self.r_cols().start;
            let mut v = d.view_mut((0, r0), (d.nrows(), self.p2));
            v += &dw * wf.d();
        }
        Ok(LoopModel { a, b, c, d, ..self.clone() })
    }
}

/// Close the loop around `plant` with `ctrl`.
pub fn close_loop(plant: &Plant, ctrl: &LoopController) -> Result<LoopModel> {
    if ctrl.p2() != plant.p2() || ctrl.m2() != plant.m2() {
        return Err(Error::Dimension("controller does not match the plant".into()));
    }
    let (n, m1, m2, p1, p2) = (plant.n(), plant.m1(), plant.m2(), plant.p1(), plant.p2());
    let nk = ctrl.nstates();
    let lay = Layout::new(&[n, nk, m1, p2, m2]);
    let (x, xi, w, r, phi) = (lay.sel(0), lay.sel(1), lay.sel(2), lay.sel(3), lay.sel(4));
    let ks = ctrl.system();
    let y = plant.c2() * &x + plant.d21() * &w;
    let kin = vstack(&[&y, &r, &phi]);
    let kout = ks.c() * &xi + ks.d() * &kin;
    let rows = |rg: Range<usize>| kout.rows(rg.start, rg.len()).into_owned();
    let u = rows(ctrl.u_rows());
    let xdot = plant.a() * &x + plant.b1() * &w + plant.b2() * &u;
    let xidot = ks.a() * &xi + ks.b() * &kin;
    let z = plant.c1() * (plant.c2() * &x - &r) + plant.d12() * &u;
    let zm = plant.c1() * (&y - &r) + plant.d12() * &u;
    let out = vstack(&[&z, &zm, &y, &u, &rows(ctrl.uc_rows()), &rows(ctrl.uq_rows()), &rows(ctrl.f_rows()), &w]);
    let (a, b) = lay.split(&vstack(&[&xdot, &xidot]), 2);
    let (c, d) = lay.split(&out, 2);
    Ok(LoopModel {
        a,
        b,
        c,
        d,
        n_plant: n,
        m1,
        p1,
        p2,
        m2,
        nf: ctrl.f_rows().len(),
        feedforward: ctrl.feedforward.clone(),
    })
}

/// Performance channels of a closed loop:
/// `x̄' = Ā x̄ + B̄1 w + B̄r r + B̄φ φ`, `z = C̄1 x̄ + D1 w + Dr r + Dφ φ`,
/// where `φ` is produced from `r` by an optional anticausal feedforward.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopSystem {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub br: DMatrix<f64>,
    pub b_phi: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub d1: DMatrix<f64>,
    pub dr: DMatrix<f64>,
    pub d_phi: DMatrix<f64>,
    pub feedforward: Option<AnticausalFeedforward>,
}

impl ClosedLoopSystem {
    pub fn from_loop(m: &LoopModel) -> Self {
        let zr = m.rows(LoopOutput::Z);
        let cols = |rg: Range<usize>, src: &DMatrix<f64>| src.columns(rg.start, rg.len()).into_owned();
        let dz = m.d.rows(zr.start, zr.len()).into_owned();
        ClosedLoopSystem {
            a: m.a.clone(),
            b1: cols(m.w_cols(), &m.b),
            br: cols(m.r_cols(), &m.b),
            b_phi: cols(m.phi_cols(), &m.b),
            c1: m.c.rows(zr.start, zr.len()).into_owned(),
            d1: cols(m.w_cols(), &dz),
            dr: cols(m.r_cols(), &dz),
            d_phi: cols(m.phi_cols(), &dz),
            feedforward: m.feedforward.clone(),
        }
    }

    pub fn is_stable(&self) -> Result<bool> {
        linalg::is_stable(&self.a)
    }

    /// Change of state coordinates `x_new = T x`.
    pub fn transform(&self, t: &DMatrix<f64>) -> Result<Self> {
        let ti = linalg::inverse(t, "similarity transform")?;
        Ok(Self {
            a: t * &self.a * &ti,
            b1: t * &self.b1,
            br: t * &self.br,
            b_phi: t * &self.b_phi,
            c1: &self.c1 * &ti,
            ..self.clone()
        })
    }

    /// `w -> z`.
    pub fn w_channel(&self) -> Result<StateSpace> {
        StateSpace::new(self.a.clone(), self.b1.clone(), self.c1.clone(), self.d1.clone())
    }

    /// `r -> z` including the feedforward path. With a feedforward the
    /// realization carries the anti-stable `b` states; its frequency
    /// response is the bounded (two-sided) steady-state response.
    pub fn r_channel(&self) -> Result<StateSpace> {
        match &self.feedforward {
            None => StateSpace::new(self.a.clone(), self.br.clone(), self.c1.clone(), self.dr.clone()),
            Some(ff) => {
                let nb = ff.nstates();
                let n = self.a.nrows();
                let a = block(&[&[&self.a, &(&self.b_phi * &ff.out_b)], &[&zeros(nb, n), &(-ff.m.transpose())]]);
                let b = vstack(&[&(&self.br + &self.b_phi * &ff.out_r), &ff.s]);
                let c = hstack(&[&self.c1, &(&self.d_phi * &ff.out_b)]);
                let d = &self.dr + &self.d_phi * &ff.out_r;
                StateSpace::new(a, b, c, d)
            }
        }
    }

    /// `[T_zw(jω), T_zr(jω)]`.
    pub fn response(&self, omega: f64) -> Result<CMatrix> {
        let tw = self.w_channel()?.response(omega)?;
        let tr = self.r_channel()?.response(omega)?;
        let mut out = CMatrix::zeros(tw.nrows(), tw.ncols() + tr.ncols());
        out.columns_mut(0, tw.ncols()).copy_from(&tw);
        out.columns_mut(tw.ncols(), tr.ncols()).copy_from(&tr);
        Ok(out)
    }
}

/// Closed loop of `plant` and `composite` in coordinates
/// `[x; x - x̂; x_c; x_q]`.
pub fn assemble_closed_loop(plant: &Plant, composite: &CompositeController) -> Result<ClosedLoopSystem> {
    let ctrl = composite.to_loop_controller()?;
    let cl = ClosedLoopSystem::from_loop(&close_loop(plant, &ctrl)?);
    let n = plant.n();
    let rest = ctrl.nstates() - n;
    let t = block(&[
        &[&eye(n), &zeros(n, n), &zeros(n, rest)],
        &[&eye(n), &(-eye(n)), &zeros(n, rest)],
        &[&zeros(rest, n), &zeros(rest, n), &eye(rest)],
    ]);
    let cl = cl.transform(&t)?;
    if !cl.is_stable()? {
        return Err(Error::Unstable { what: "closed loop".into(), abscissa: linalg::spectral_abscissa(&cl.a)? });
    }
    Ok(cl)
}

/// `z = z1 + z2` with `z1 = T_z1w w` (depends only on `K`) and
/// `z2 = T_z2r r` (depends only on the nominal design).
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaDecomposition {
    pub t_z1w: StateSpace,
    pub t_z2r: StateSpace,
}

/// `w -> z` for the plant in feedback with `K` (no reference).
pub fn robust_channel(plant: &Plant, k: &StateSpace) -> Result<StateSpace> {
    let a = loop_matrix(plant, k)?;
    if !linalg::is_stable(&a)? {
        return Err(Error::Unstable { what: "loop with K".into(), abscissa: linalg::spectral_abscissa(&a)? });
    }
    let b = vstack(&[&(plant.b1() + plant.b2() * k.d() * plant.d21()), &(k.b() * plant.d21())]);
    let c = hstack(&[&((plant.c1() + plant.d12() * k.d()) * plant.c2()), &(plant.d12() * k.c())]);
    let d = plant.d12() * k.d() * plant.d21();
    StateSpace::new(a, b, c, d)
}

/// Split for a nominal controller `C` acting on `y - r`.
pub fn decompose_lemma1(plant: &Plant, c: &StateSpace, k: &StateSpace) -> Result<LemmaDecomposition> {
    let t_z1w = robust_channel(plant, k)?;
    let a = loop_matrix(plant, c)?;
    if !linalg::is_stable(&a)? {
        return Err(Error::Unstable { what: "loop with C".into(), abscissa: linalg::spectral_abscissa(&a)? });
    }
    let b = vstack(&[&(-(plant.b2() * c.d())), &(-c.b())]);
    let cz = hstack(&[&((plant.c1() + plant.d12() * c.d()) * plant.c2()), &(plant.d12() * c.c())]);
    let d = -(plant.c1() + plant.d12() * c.d());
    Ok(LemmaDecomposition { t_z1w, t_z2r: StateSpace::new(a, b, cz, d)? })
}

/// Split for a nominal loop given as a [`LoopController`] (for instance
/// observer feedback with an anticausal feedforward); `T_z2r` is its
/// reference channel.
pub fn decompose_with_nominal(plant: &Plant, nominal: &LoopController, k: &StateSpace) -> Result<LemmaDecomposition> {
    let t_z1w = robust_channel(plant, k)?;
    let cl = ClosedLoopSystem::from_loop(&close_loop(plant, nominal)?);
    if !cl.is_stable()? {
        return Err(Error::Unstable { what: "nominal loop".into(), abscissa: linalg::spectral_abscissa(&cl.a)? });
    }
    Ok(LemmaDecomposition { t_z1w, t_z2r: cl.r_channel()? })
}

fn require_stable_sys(sys: &StateSpace, what: &str) -> Result<()> {
    if !sys.is_stable()? {
        return Err(Error::Unstable { what: what.into(), abscissa: linalg::spectral_abscissa(sys.a())? });
    }
    Ok(())
}

/// `sup_ω σ̄(G(jω))` and a frequency where it is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfNorm {
    pub value: f64,
    pub peak_omega: f64,
}

fn sigma_max_at(sys: &StateSpace, omega: f64) -> Result<f64> {
    Ok(linalg::max_singular_value(&sys.response(omega)?))
}

/// H∞ norm of a stable system to relative accuracy `tol`, by the
/// two-step Hamiltonian iteration: raise the lower bound at the midpoints
/// of the imaginary-axis eigenvalue intervals until none remain.
pub fn hinf_norm_peak(sys: &StateSpace, tol: f64) -> Result<HinfNorm> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    require_stable_sys(sys, "system")?;
    let d = sys.d();
    let sd = linalg::singular_values(d).iter().cloned().fold(0.0, f64::max);
    if sys.nstates() == 0 {
        return Ok(HinfNorm { value: sd, peak_omega: f64::INFINITY });
    }
    let mut best = HinfNorm { value: sd, peak_omega: f64::INFINITY };
    let probe = |w: f64, best: &mut HinfNorm| -> Result<()> {
        let s = sigma_max_at(sys, w)?;
        if s > best.value {
            *best = HinfNorm { value: s, peak_omega: w };
        }
        Ok(())
    };
    probe(0.0, &mut best)?;
    for p in linalg::eigenvalues(sys.a())? {
        let w = if p.im.abs() > 0.0 { p.norm() } else { p.re.abs() };
        probe(w, &mut best)?;
        probe(p.im.abs(), &mut best)?;
    }

    let (a, b, c) = (sys.a(), sys.b(), sys.c());
    let (nu, ny) = (b.ncols(), c.nrows());
    for _ in 0..100 {
        let g = (1.0 + 2.0 * tol) * best.value;
        if g == 0.0 {
            break;
        }
        let g2 = g * g;
        let r = eye(nu) * g2 - d.transpose() * d;
        let ri = linalg::inverse(&r, "γ²I - D'D")?;
        let ah = a + b * &ri * d.transpose() * c;
        let h = block(&[
            &[&ah, &(b * &ri * b.transpose())],
            &[&(-(c.transpose() * (eye(ny) + d * &ri * d.transpose()) * c)), &(-ah.transpose())],
        ]);
        let scale = 1.0 + h.norm();
        let mut ws: Vec<f64> = linalg::eigenvalues(&h)?
            .into_iter()
            .filter(|z| z.re.abs() <= 1e-8 * (scale + z.norm()) && z.im >= 0.0)
            .map(|z| z.im)
            .collect();
        if ws.is_empty() {
            break;
        }
        ws.sort_by(f64::total_cmp);
        ws.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
        let before = best.value;
        let candidates: Vec<f64> = if ws.len() == 1 {
            ws.clone()
        } else {
            ws.windows(2).map(|p| 0.5 * (p[0] + p[1])).chain(ws.iter().cloned()).collect()
        };
        for w in candidates {
            probe(w, &mut best)?;
        }
        if best.value <= before {
            break;
        }
    }
    Ok(best)
}

pub fn hinf_norm(sys: &StateSpace, tol: f64) -> Result<f64> {
    Ok(hinf_norm_peak(sys, tol)?.value)
}

/// `‖G s‖_P` for a stable `G`.
pub fn power_norm_response(sys: &StateSpace, s: &SignalSpec) -> Result<f64> {
    require_stable_sys(sys, "system")?;
    if s.dependency().is_some() {
        return Err(Error::Signal("input depends on a reference; pass its full spectrum".into()));
    }
    bounded_response_power(sys, &s.spectrum()).map(f64::sqrt)
}

/// Mean-square value of the bounded steady-state response of `sys` to the
/// spectrum. Only requires that `sys` has no pole at the signal's
/// frequencies, so anticausal (two-sided) realizations are allowed.
pub fn bounded_response_power(sys: &StateSpace, s: &Spectrum) -> Result<f64> {
    Ok(s.through(sys)?.power())
}

/// Squared power norms `‖z‖², ‖z1‖², ‖z2‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Report {
    pub z_sq: f64,
    pub z1_sq: f64,
    pub z2_sq: f64,
}

/// Power split for independent `w` and `r` with no shared frequency.
pub fn theorem1_decomposition(dec: &LemmaDecomposition, w: &SignalSpec, r: &SignalSpec) -> Result<Theorem1Report> {
    if w.dependency().is_some() || r.dependency().is_some() {
        return Err(Error::Signal("signals must be independent; use theorem2_bound for dependent disturbances".into()));
    }
    require_stable_sys(&dec.t_z1w, "T_z1w")?;
    let (ws, rs) = (w.spectrum(), r.spectrum());
    if let Some(omega) = ws.shared_frequency(&rs) {
        return Err(Error::NotOrthogonal { omega });
    }
    let z1 = ws.through(&dec.t_z1w)?;
    let z2 = rs.through(&dec.t_z2r)?;
    let z = z1.plus(&z2)?;
    Ok(Theorem1Report { z_sq: z.power(), z1_sq: z1.power(), z2_sq: z2.power() })
}

/// Pointwise worst dependency `W̃(jω) = (γ²I - T1*T1)^{-1} T1* T2` and the
/// kernel `T2*(I - γ^{-2} T1 T1*)^{-1} T2` of the pointwise supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstDependency {
    pub omega: f64,
    pub gamma: f64,
    pub w_tilde: CMatrix,
    pub kernel: CMatrix,
}

impl WorstDependency {
    /// Supremum of the pointwise objective for reference phasor `v`.
    pub fn supremum(&self, v: &DVector<C64>) -> f64 {
        (v.adjoint() * &self.kernel * v)[(0, 0)].re
    }
}

pub fn worst_dependency(dec: &LemmaDecomposition, gamma: f64, omega: f64) -> Result<WorstDependency> {
    let t1 = dec.t_z1w.response(omega)?;
    let t2 = dec.t_z2r.response(omega)?;
    if linalg::max_singular_value(&t1) >= gamma {
        return Err(Error::Singular(format!("gamma {gamma} does not exceed the gain of T_z1w at {omega} rad/s")));
    }
    let g2 = C64::new(gamma * gamma, 0.0);
    let m1 = t1.ncols();
    let p1 = t1.nrows();
    let lhs = CMatrix::identity(m1, m1) * g2 - t1.adjoint() * &t1;
    let w_tilde = linalg::solve_complex(&lhs, &(t1.adjoint() * &t2)).ok_or_else(|| Error::Singular("γ²I - T1*T1".into()))?;
    let inner = CMatrix::identity(p1, p1) - &t1 * t1.adjoint() / g2;
    let kernel = t2.adjoint() * linalg::solve_complex(&inner, &t2).ok_or_else(|| Error::Singular("I - T1 T1*/γ²".into()))?;
    Ok(WorstDependency { omega, gamma, w_tilde, kernel })
}

/// Pointwise objective `‖(T1 W + T2) v‖² - γ²‖W v‖²` maximized by `W̃`.
pub fn dependency_objective(dec: &LemmaDecomposition, gamma: f64, omega: f64, w: &CMatrix, v: &DVector<C64>) -> Result<f64> {
    let t1 = dec.t_z1w.response(omega)?;
    let t2 = dec.t_z2r.response(omega)?;
    let wv = w * v;
    Ok((&t1 * &wv + &t2 * v).norm_squared() - gamma * gamma * wv.norm_squared())
}

/// Power split with a disturbance `w = w1 + W(r)` that partly depends on
/// the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem2Report {
    pub z_sq: f64,
    pub z1_sq: f64,
    /// `‖(T1 W + T2) r‖²`
    pub z2_tilde_sq: f64,
    /// `‖T2 r‖²`, the disturbance-free tracking term.
    pub z2_sq: f64,
    pub w_sq: f64,
    pub t1_hinf: f64,
    /// `‖T1‖∞² ‖w‖² + ‖z2‖²`.
    pub bound: f64,
    /// Whether `‖z‖² ≤ bound`. Cross terms between `W(r)` and `r` can make
    /// this false, so it is reported rather than enforced.
    pub bound_holds: bool,
}

pub fn theorem2_bound(dec: &LemmaDecomposition, gamma: f64, r: &SignalSpec, w1: &SignalSpec, wf: &StateSpace) -> Result<Theorem2Report> {
    if r.dependency().is_some() || w1.dependency().is_some() {
        return Err(Error::Signal("r and w1 must be independent signals".into()));
    }
    let t1_hinf = hinf_norm(&dec.t_z1w, 1e-9)?;
    if !(t1_hinf < gamma) {
        return Err(Error::InvalidArgument(format!("‖T_z1w‖∞ = {t1_hinf} is not below gamma = {gamma}")));
    }
    let rs = r.spectrum();
    let w1s = w1.spectrum();
    let wr = rs.through(wf)?;
    if let Some(omega) = w1s.shared_frequency(&rs).or_else(|| w1s.shared_frequency(&wr)) {
        return Err(Error::NotOrthogonal { omega });
    }
    let w = w1s.plus(&wr)?;
    let z1 = w1s.through(&dec.t_z1w)?;
    let z2 = rs.through(&dec.t_z2r)?;
    let z2t = wr.through(&dec.t_z1w)?.plus(&z2)?;
    let z = z1.plus(&z2t)?;
    let bound = t1_hinf * t1_hinf * w.power() + z2.power();
    let z_sq = z.power();
    Ok(Theorem2Report {
        z_sq,
        z1_sq: z1.power(),
        z2_tilde_sq: z2t.power(),
        z2_sq: z2.power(),
        w_sq: w.power(),
        t1_hinf,
        bound,
        bound_holds: z_sq <= bound * (1.0 + 1e-12),
    })
}
