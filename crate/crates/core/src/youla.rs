//! Youla-type compensators `Q` that turn a nominal controller `C` into a
//! robust controller `K`, and the composite controller `C + αQ`.
//!
//! The composite runs an output observer `x̂' = A x̂ + B2 u + L f` with
//! residual `f = C2 x̂ - y`, a nominal block producing `u_c`, and the
//! compensator `u_q = α(Cq x_q + Dq f)`. At `α = 1` the map `y -> u` equals
//! `K`; at `α = 0` it equals the nominal controller.

use nalgebra::DMatrix;

use crate::controller::{Layout, LoopController};
use crate::error::{Error, Result};
use crate::feedforward::AnticausalFeedforward;
use crate::linalg::{self, block, eye, hstack, vstack, zeros};
use crate::lti::{FrequencyGrid, Plant, StateSpace};

fn require_stable(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() > 0 && !linalg::is_stable(m)? {
        return Err(Error::Unstable { what: what.into(), abscissa: linalg::spectral_abscissa(m)? });
    }
    Ok(())
}

fn check_observer(plant: &Plant, l: &DMatrix<f64>) -> Result<()> {
    if l.shape() != (plant.n(), plant.p2()) {
        return Err(Error::Dimension(format!("observer gain must be {}x{}", plant.n(), plant.p2())));
    }
    require_stable(&(plant.a() + l * plant.c2()), "A + L C2")
}

/// Closed-loop state matrix of the noise-free plant with `u = G y`.
pub fn loop_matrix(plant: &Plant, g: &StateSpace) -> Result<DMatrix<f64>> {
    if g.ninputs() != plant.p2() || g.noutputs() != plant.m2() {
        return Err(Error::Dimension(format!(
            "controller must map {} measurements to {} inputs",
            plant.p2(),
            plant.m2()
        )));
    }
    Ok(block(&[
        &[&(plant.a() + plant.b2() * g.d() * plant.c2()), &(plant.b2() * g.c())],
        &[&(g.b() * plant.c2()), g.a()],
    ]))
}

fn check_stabilizing(plant: &Plant, g: &StateSpace, what: &str) -> Result<()> {
    require_stable(&loop_matrix(plant, g)?, what)
}

/// Left coprime factors `G = M̃^{-1} Ñ` of the noise-free plant `u -> y`,
/// built from an observer gain `L` (`A + L C2` stable).
#[derive(Debug, Clone, PartialEq)]
pub struct CoprimeFactors {
    /// `Ñ = [A + L C2 | B2; C2 | 0]`
    pub n_tilde: StateSpace,
    /// `M̃ = [A + L C2 | L; C2 | I]`
    pub m_tilde: StateSpace,
}

impl CoprimeFactors {
    /// `f = Ñ u - M̃ y` as one system on `[u; y]`; equals `C2 x̂ - y`.
    pub fn residual_generator(&self) -> Result<StateSpace> {
        let m = &self.m_tilde;
        let neg = StateSpace::new(m.a().clone(), -m.b(), m.c().clone(), -m.d())?;
        self.n_tilde.hjoin(&neg)
    }
}

pub fn left_coprime_factors(plant: &Plant, l: &DMatrix<f64>) -> Result<CoprimeFactors> {
    check_observer(plant, l)?;
    let al = plant.a() + l * plant.c2();
    let p2 = plant.p2();
    Ok(CoprimeFactors {
        n_tilde: StateSpace::new(al.clone(), plant.b2().clone(), plant.c2().clone(), zeros(p2, plant.m2()))?,
        m_tilde: StateSpace::new(al, l.clone(), plant.c2().clone(), eye(p2))?,
    })
}

/// A dynamic nominal controller with an output-injection gain `Lc`
/// (`Ac + Lc Cc` stable) used to build its left coprime factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerRealization {
    pub sys: StateSpace,
    pub lc: DMatrix<f64>,
}

impl ControllerRealization {
    pub fn new(sys: StateSpace, lc: DMatrix<f64>) -> Result<Self> {
        if lc.shape() != (sys.nstates(), sys.noutputs()) {
            return Err(Error::Dimension("Lc must be nc x m2".into()));
        }
        require_stable(&(sys.a() + &lc * sys.c()), "Ac + Lc Cc")?;
        Ok(Self { sys, lc })
    }

    /// `(Ũ, Ṽ)` with `C = Ṽ^{-1} Ũ`, both stable.
    pub fn left_coprime_factors(&self) -> Result<(StateSpace, StateSpace)> {
        let s = &self.sys;
        let abar = s.a() + &self.lc * s.c();
        let u = StateSpace::new(abar.clone(), s.b() + &self.lc * s.d(), s.c().clone(), s.d().clone())?;
        let m2 = s.noutputs();
        let v = StateSpace::new(abar, self.lc.clone(), s.c().clone(), eye(m2))?;
        Ok((u, v))
    }
}

/// State-space realization of `Q`, scaled by `alpha` at its output.
#[derive(Debug, Clone, PartialEq)]
pub struct QRealization {
    pub aq: DMatrix<f64>,
    pub bq: DMatrix<f64>,
    pub cq: DMatrix<f64>,
    pub dq: DMatrix<f64>,
    pub alpha: f64,
}

impl QRealization {
    pub fn nstates(&self) -> usize {
        self.aq.nrows()
    }

    /// `α Q` as a system `f -> u_q`.
    pub fn system(&self) -> Result<StateSpace> {
        StateSpace::new(self.aq.clone(), self.bq.clone(), &self.cq * self.alpha, &self.dq * self.alpha)
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }
}

fn k_blocks(plant: &Plant, k: &StateSpace) -> (DMatrix<f64>, DMatrix<f64>) {
    let aq = block(&[
        &[&(plant.a() + plant.b2() * k.d() * plant.c2()), &(plant.b2() * k.c())],
        &[&(k.b() * plant.c2()), k.a()],
    ]);
    let bq = vstack(&[&(-(plant.b2() * k.d())), &(-k.b())]);
    (aq, bq)
}

/// `Q` for a general dynamic nominal controller.
pub fn build_q_general(plant: &Plant, c: &ControllerRealization, k: &StateSpace, l: &DMatrix<f64>) -> Result<QRealization> {
    check_observer(plant, l)?;
    check_stabilizing(plant, &c.sys, "nominal loop")?;
    check_stabilizing(plant, k, "robust loop")?;
    let (a, b2, c2) = (plant.a(), plant.b2(), plant.c2());
    let cs = &c.sys;
    let lc = &c.lc;
    let dq = cs.d() - k.d();
    let nc = cs.nstates();
    let nk = k.nstates();
    let n = plant.n();
    let aq = block(&[
        &[&(cs.a() + lc * cs.c()), &((cs.b() + lc * &dq) * c2), &(-(lc * k.c()))],
        &[&zeros(n, nc), &(a + b2 * k.d() * c2), &(b2 * k.c())],
        &[&zeros(nk, nc), &(k.b() * c2), k.a()],
    ]);
    let bq = vstack(&[&(-(cs.b() + lc * &dq)), &(l - b2 * k.d()), &(-k.b())]);
    let cq = hstack(&[&(-cs.c()), &(-(&dq * c2)), k.c()]);
    require_stable(&aq, "Aq")?;
    Ok(QRealization { aq, bq, cq, dq, alpha: 1.0 })
}

/// `Q` for an observer-based nominal controller `u = F x̂` sharing the
/// observer of the composite.
pub fn build_q_shared(plant: &Plant, f: &DMatrix<f64>, l: &DMatrix<f64>, k: &StateSpace) -> Result<QRealization> {
    check_observer(plant, l)?;
    require_stable(&(plant.a() + plant.b2() * f), "A + B2 F")?;
    check_stabilizing(plant, k, "robust loop")?;
    let (aq, bq0) = k_blocks(plant, k);
    let n = plant.n();
    let mut bq = bq0;
    {
        let mut top = bq.rows_mut(0, n);
        top += l;
    }
    let cq = hstack(&[&(k.d() * plant.c2() - f), k.c()]);
    require_stable(&aq, "Aq")?;
    Ok(QRealization { aq, bq, cq, dq: -k.d(), alpha: 1.0 })
}

/// `Q` for a static nominal controller `u = Dc y`.
pub fn build_q_static(plant: &Plant, dc: &DMatrix<f64>, k: &StateSpace, l: &DMatrix<f64>) -> Result<QRealization> {
    check_observer(plant, l)?;
    if dc.shape() != (plant.m2(), plant.p2()) {
        return Err(Error::Dimension("Dc must be m2 x p2".into()));
    }
    require_stable(&(plant.a() + plant.b2() * dc * plant.c2()), "A + B2 Dc C2")?;
    check_stabilizing(plant, k, "robust loop")?;
    let (aq, bq0) = k_blocks(plant, k);
    let n = plant.n();
    let mut bq = bq0;
    {
        let mut top = bq.rows_mut(0, n);
        top += l;
    }
    let cq = hstack(&[&((k.d() - dc) * plant.c2()), k.c()]);
    require_stable(&aq, "Aq")?;
    Ok(QRealization { aq, bq, cq, dq: dc - k.d(), alpha: 1.0 })
}

/// The nominal part of a composite controller.
#[derive(Debug, Clone, PartialEq)]
pub enum NominalBlock {
    /// Dynamic controller with its own state.
    General(ControllerRealization),
    /// `u_c = F x̂` using the composite's observer.
    Shared { f: DMatrix<f64> },
    /// `u_c = Dc y`.
    Static { dc: DMatrix<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositeMode {
    General,
    Shared,
    Static,
}

/// How the reference enters the nominal block.
#[derive(Debug, Clone, PartialEq)]
pub enum Tracking {
    /// Regulation only; `r` is ignored.
    None,
    /// The nominal block acts on `y - r`. In shared mode an extra observer
    /// copy `x_r' = (A + L C2) x_r + L r` supplies the reference part and
    /// `u_c = F(x̂ + x_r)`.
    ErrorDriven,
    /// `u_c` gets an additive feedforward `φ` computed from `r`.
    Feedforward(AnticausalFeedforward),
}

/// Composite controller `C + αQ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeController {
    pub plant: Plant,
    pub l: DMatrix<f64>,
    pub nominal: NominalBlock,
    pub q: QRealization,
    pub tracking: Tracking,
}

/// Build `Q` for the given nominal block and robust controller `K` and
/// return the composite at level `alpha`.
pub fn assemble_composite(
    plant: &Plant,
    nominal: NominalBlock,
    k: &StateSpace,
    l: &DMatrix<f64>,
    alpha: f64,
    tracking: Tracking,
) -> Result<CompositeController> {
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument("alpha must be finite".into()));
    }
    let q = match &nominal {
        NominalBlock::General(c) => build_q_general(plant, c, k, l)?,
        NominalBlock::Shared { f } => build_q_shared(plant, f, l, k)?,
        NominalBlock::Static { dc } => build_q_static(plant, dc, k, l)?,
    };
    if let Tracking::Feedforward(ff) = &tracking {
        if ff.ninputs() != plant.p2() || ff.noutputs() != plant.m2() {
            return Err(Error::Dimension("feedforward must map r (p2) to u (m2)".into()));
        }
    }
    Ok(CompositeController { plant: plant.clone(), l: l.clone(), nominal, q: q.with_alpha(alpha), tracking })
}

impl CompositeController {
    pub fn mode(&self) -> CompositeMode {
        match self.nominal {
            NominalBlock::General(_) => CompositeMode::General,
            NominalBlock::Shared { .. } => CompositeMode::Shared,
            NominalBlock::Static { .. } => CompositeMode::Static,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.q.alpha
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { q: self.q.with_alpha(alpha), ..self.clone() }
    }

    /// Number of nominal-block states (`x_c`, or `x_r` in shared tracking).
    pub fn nominal_states(&self) -> usize {
        match (&self.nominal, &self.tracking) {
            (NominalBlock::General(c), _) => c.sys.nstates(),
            (NominalBlock::Shared { .. }, Tracking::ErrorDriven) => self.plant.n(),
            _ => 0,
        }
    }

    /// Simulatable form with states `[x̂; x_c; x_q]`.
    pub fn to_loop_controller(&self) -> Result<LoopController> {
        let p = &self.plant;
        let (n, m2, p2) = (p.n(), p.m2(), p.p2());
        let nc = self.nominal_states();
        let nq = self.q.nstates();
        // Columns: x̂, x_c, x_q, y, r, φ.
        let lay = Layout::new(&[n, nc, nq, p2, p2, m2]);
        let (xh, xc, xq, y, r, phi) = (lay.sel(0), lay.sel(1), lay.sel(2), lay.sel(3), lay.sel(4), lay.sel(5));
        let track = matches!(self.tracking, Tracking::ErrorDriven);
        let e = if track { &y - &r } else { y.clone() };

        let fres = p.c2() * &xh - &y;
        let uq = (&self.q.cq * &xq + &self.q.dq * &fres) * self.q.alpha;
        let (mut uc, xc_dot) = match &self.nominal {
            NominalBlock::General(c) => {
                let s = &c.sys;
                (s.c() * &xc + s.d() * &e, s.a() * &xc + s.b() * &e - &c.lc * &uq)
            }
            NominalBlock::Shared { f } => {
                if track {
                    (f * (&xh + &xc), (p.a() + &self.l * p.c2()) * &xc + &self.l * &r)
                } else {
                    (f * &xh, zeros(0, lay.total()))
                }
            }
            NominalBlock::Static { dc } => (dc * &e, zeros(0, lay.total())),
        };
        let ff = match &self.tracking {
            Tracking::Feedforward(ff) => {
                uc += &phi;
                Some(ff.clone())
            }
            _ => None,
        };
        let u = &uc + &uq;
        let xh_dot = p.a() * &xh + p.b2() * &u + &self.l * &fres;
        let xq_dot = &self.q.aq * &xq + &self.q.bq * &fres;
        let xdot = vstack(&[&xh_dot, &xc_dot, &xq_dot]);
        let out = vstack(&[&u, &uc, &uq, &fres]);
        let sys = lay.state_space(&xdot, &out, 3)?;
        let name = format!("composite(alpha={})", self.q.alpha);
        LoopController::new(name, sys, p2, m2, ff)
    }

    /// Map `y -> u` with `r = 0`.
    pub fn y_to_u(&self) -> Result<StateSpace> {
        Ok(self.to_loop_controller()?.y_to_u())
    }
}

/// Result of comparing the composite `y -> u` map against `K` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferCheck {
    /// `max ‖T(jω) - K(jω)‖ / max(1, ‖K(jω)‖)` over evaluated frequencies.
    pub max_deviation: f64,
    pub worst_omega: f64,
    /// Frequencies skipped because a pole sits on the imaginary axis there.
    pub skipped: Vec<f64>,
}

impl TransferCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_deviation <= tol
    }
}

/// Check that the composite (at its current `α`, normally 1) realizes `K`.
pub fn verify_transfer_equality(composite: &CompositeController, k: &StateSpace, grid: &FrequencyGrid) -> Result<TransferCheck> {
    let t = composite.y_to_u()?;
    let mut out = TransferCheck { max_deviation: 0.0, worst_omega: f64::NAN, skipped: Vec::new() };
    for &w in grid.as_slice() {
        let (tw, kw) = match (t.response(w), k.response(w)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(Error::SingularFrequency { .. }), _) | (_, Err(Error::SingularFrequency { .. })) => {
                out.skipped.push(w);
                continue;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let scale = linalg::max_singular_value(&kw).max(1.0);
        let dev = linalg::max_singular_value(&(tw - kw)) / scale;
        if !(dev <= out.max_deviation) {
            out.max_deviation = dev;
            out.worst_omega = w;
        }
    }
    Ok(out)
}
