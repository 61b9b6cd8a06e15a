//! Continuous algebraic Riccati equations and the LQ-tracking / central
//! H-infinity synthesis built on them.

use nalgebra::DMatrix;

use crate::error::{Error, Infeasibility, Result};
use crate::linalg::{self, all_finite, eye, hstack, is_stable, solve_lyapunov, spectral_abscissa, symmetrize, zeros};
use crate::lti::Plant;

/// `A'X + XA - (XB + S) R^{-1} (XB + S)' + Q = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CareProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

impl CareProblem {
    /// Problem without cross term.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Self {
        let s = zeros(a.nrows(), b.ncols());
        Self { a, b, q, r, s }
    }

    pub fn with_cross(mut self, s: DMatrix<f64>) -> Self {
        self.s = s;
        self
    }

    fn validate(&self) -> Result<()> {
        let (n, m) = (self.a.nrows(), self.b.ncols());
        let ok = self.a.ncols() == n
            && self.b.nrows() == n
            && self.q.shape() == (n, n)
            && self.r.shape() == (m, m)
            && self.s.shape() == (n, m);
        if !ok {
            return Err(Error::Dimension("CARE data have inconsistent shapes".into()));
        }
        for (mat, name) in [(&self.a, "A"), (&self.b, "B"), (&self.q, "Q"), (&self.r, "R"), (&self.s, "S")] {
            if !all_finite(mat) {
                return Err(Error::NonFinite(name));
            }
        }
        let sym_tol = 1e-10 * (1.0 + self.q.norm());
        if (&self.q - self.q.transpose()).norm() > sym_tol {
            return Err(Error::InvalidArgument("Q must be symmetric".into()));
        }
        if (&self.r - self.r.transpose()).norm() > 1e-10 * (1.0 + self.r.norm()) {
            return Err(Error::InvalidArgument("R must be symmetric".into()));
        }
        Ok(())
    }

    /// Gain `K = R^{-1} (XB + S)'` so that the optimal input is `-K x`.
    pub fn gain(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        linalg::solve(&self.r, &(x * &self.b + &self.s).transpose(), "R")
    }

    pub fn residual(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let xbs = x * &self.b + &self.s;
        let k = self.gain(x)?;
        Ok(self.a.transpose() * x + x * &self.a - xbs * k + &self.q)
    }

    /// `A - B K` for the candidate solution `x`.
    pub fn closed_loop(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(&self.a - &self.b * self.gain(x)?)
    }
}

/// Residual tolerance applied to every returned solution.
pub fn care_tolerance(x: &DMatrix<f64>) -> f64 {
    1e-8 * (1.0 + x.norm())
}

/// Stabilizing solution of a CARE with symmetric positive definite `R`.
pub fn solve_care(p: &CareProblem) -> Result<DMatrix<f64>> {
    p.validate()?;
    if p.r.nrows() > 0 && p.r.clone().cholesky().is_none() {
        return Err(Error::InvalidArgument("R must be positive definite".into()));
    }
    solve_care_unchecked(p)
}

/// Stabilizing solution for symmetric invertible (possibly indefinite) `R`,
/// as needed by the game-type equations of H-infinity synthesis.
pub fn solve_care_indefinite(p: &CareProblem) -> Result<DMatrix<f64>> {
    p.validate()?;
    solve_care_unchecked(p)
}

fn solve_care_unchecked(p: &CareProblem) -> Result<DMatrix<f64>> {
    let n = p.a.nrows();
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    let rinv_st = linalg::solve(&p.r, &p.s.transpose(), "R")?;
    let rinv_bt = linalg::solve(&p.r, &p.b.transpose(), "R")?;
    let a_t = &p.a - &p.b * &rinv_st;
    let g = &p.b * &rinv_bt;
    let q_t = &p.q - &p.s * &rinv_st;
    let h = linalg::block(&[&[&a_t, &(-&g)], &[&(-&q_t), &(-a_t.transpose())]]);

    let hscale = h.norm().max(1.0);
    let ev = linalg::eigenvalues(&h)?;
    if let Some(z) = ev.iter().find(|z| z.re.abs() <= 1e-11 * hscale) {
        return Err(Error::NoStabilizingSolution(format!(
            "Hamiltonian eigenvalue {:.3e}{:+.3e}i on the imaginary axis",
            z.re, z.im
        )));
    }
    let os = linalg::ordered_schur(&h, |z| z.re < 0.0)?;
    if os.selected != n {
        return Err(Error::NoStabilizingSolution(format!(
            "stable invariant subspace has dimension {} instead of {}",
            os.selected, n
        )));
    }
    let u1 = os.z.view((0, 0), (n, n)).clone_owned();
    let u2 = os.z.view((n, 0), (n, n)).clone_owned();
    let sv = linalg::singular_values(&u1);
    let rcond = sv.min() / sv.max();
    if !(rcond > 1e-12) {
        return Err(Error::Conditioning { rcond });
    }
    // X = U2 U1^{-1}  <=>  U1' X = U2'
    let x = linalg::solve(&u1.transpose(), &u2.transpose(), "U1")?;
    let mut x = symmetrize(&x);

    let res = p.residual(&x)?;
    if res.norm() > care_tolerance(&x) {
        // One Newton (defect-correction) step.
        let ac = p.closed_loop(&x)?;
        if let Ok(delta) = solve_lyapunov(&ac, &res) {
            let candidate = symmetrize(&(&x + delta));
            if p.residual(&candidate)?.norm() < res.norm() {
                x = candidate;
            }
        }
    }
    let res = p.residual(&x)?.norm();
    if res > care_tolerance(&x) {
        return Err(Error::NoStabilizingSolution(format!("residual {res:.3e} above tolerance")));
    }
    let ac = p.closed_loop(&x)?;
    if !is_stable(&ac)? {
        return Err(Error::NoStabilizingSolution(format!(
            "closed loop has spectral abscissa {:.3e}",
            spectral_abscissa(&ac)?
        )));
    }
    Ok(x)
}

/// LQ-optimal tracking design: `u = F x̂ - R1^{-1} B2' b + R1^{-1} D12' C1 r`
/// with the anticausal `b' = -(A + B2 F)' b + S_ff r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqtDesign {
    pub pi: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub s_ff: DMatrix<f64>,
    pub r1: DMatrix<f64>,
    /// `D12' C1`, the direct reference weighting (m2 x p2).
    pub d12t_c1: DMatrix<f64>,
}

pub fn lqt_synthesize(plant: &Plant) -> Result<LqtDesign> {
    let c1c2 = plant.c1c2();
    let r1 = plant.r1();
    let cross = c1c2.transpose() * plant.d12();
    let problem = CareProblem::new(
        plant.a().clone(),
        plant.b2().clone(),
        c1c2.transpose() * &c1c2,
        r1.clone(),
    )
    .with_cross(cross.clone());
    let pi = solve_care(&problem)?;
    let pb = &pi * plant.b2() + &cross;
    let f = -linalg::solve(&r1, &pb.transpose(), "R1")?;
    let d12t_c1 = plant.d12().transpose() * plant.c1();
    let s_ff = plant.c2().transpose() * plant.c1().transpose() * plant.c1() - &pb * linalg::solve(&r1, &d12t_c1, "R1")?;
    Ok(LqtDesign { pi, f, s_ff, r1, d12t_c1 })
}

/// Central H-infinity output-feedback controller at level `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HinfDesign {
    pub gamma: f64,
    pub p1: DMatrix<f64>,
    pub p2: DMatrix<f64>,
    pub a_inf: DMatrix<f64>,
    pub b_inf: DMatrix<f64>,
    pub c_inf: DMatrix<f64>,
    pub l_inf: DMatrix<f64>,
}

impl HinfDesign {
    /// The controller `x' = A∞ x + B∞ y`, `u = C∞ x`.
    pub fn controller(&self) -> crate::lti::StateSpace {
        let (m2, p2) = (self.c_inf.nrows(), self.b_inf.ncols());
        crate::lti::StateSpace::new(self.a_inf.clone(), self.b_inf.clone(), self.c_inf.clone(), zeros(m2, p2))
            .expect("central controller blocks are consistent by construction")
    }
}

fn is_psd(x: &DMatrix<f64>) -> bool {
    if x.nrows() == 0 {
        return true;
    }
    symmetrize(x).symmetric_eigen().eigenvalues.min() >= -1e-8 * (1.0 + x.norm())
}

fn infeasible(gamma: f64, reason: Infeasibility) -> Error {
    Error::Infeasible { gamma, reason }
}

/// Solve both game Riccati equations and form the central controller.
pub fn hinf_central(plant: &Plant, gamma: f64) -> Result<HinfDesign> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let (n, m1, m2, p2) = (plant.n(), plant.m1(), plant.m2(), plant.p2());
    let c1c2 = plant.c1c2();
    let p1w = c1c2.nrows();
    let g2 = gamma * gamma;
    let r1 = plant.r1();
    let r2 = plant.r2();

    // Control equation: B = [B1 B2], R = diag(-γ² I, R1), S = [0, (C1C2)' D12].
    let control = CareProblem {
        a: plant.a().clone(),
        b: hstack(&[plant.b1(), plant.b2()]),
        q: c1c2.transpose() * &c1c2,
        r: linalg::block_diag(&[&(-eye(m1) * g2), &r1]),
        s: hstack(&[&zeros(n, m1), &(c1c2.transpose() * plant.d12())]),
    };
    let p1 = solve_care_indefinite(&control).map_err(|_| infeasible(gamma, Infeasibility::ControlRiccati))?;
    if !is_psd(&p1) {
        return Err(infeasible(gamma, Infeasibility::ControlNotPsd));
    }

    // Filter equation (dual): A -> A', B = [(C1C2)' C2'], R = diag(-γ² I, R2), S = [0, B1 D21'].
    let filter = CareProblem {
        a: plant.a().transpose(),
        b: hstack(&[&c1c2.transpose(), &plant.c2().transpose()]),
        q: plant.b1() * plant.b1().transpose(),
        r: linalg::block_diag(&[&(-eye(p1w) * g2), &r2]),
        s: hstack(&[&zeros(n, p1w), &(plant.b1() * plant.d21().transpose())]),
    };
    let p2m = solve_care_indefinite(&filter).map_err(|_| infeasible(gamma, Infeasibility::FilterRiccati))?;
    if !is_psd(&p2m) {
        return Err(infeasible(gamma, Infeasibility::FilterNotPsd));
    }

    let rho = linalg::eigenvalues(&(&p1 * &p2m))?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if !(rho < g2 * (1.0 - 1e-9)) {
        return Err(infeasible(gamma, Infeasibility::SpectralRadius));
    }

    let gi = 1.0 / g2;
    let c_inf = -linalg::solve(&r1, &(&p1 * plant.b2() + c1c2.transpose() * plant.d12()).transpose(), "R1")?;
    let l_inf = -(plant.c2() * &p2m + plant.d21() * plant.b1().transpose()).transpose()
        * linalg::inverse(&r2, "R2")?;
    let b_inf = -linalg::solve(&(eye(n) - &p1 * &p2m * gi), &l_inf, "I - P1 P2 / gamma^2")?;
    let a_inf = plant.a() + plant.b1() * plant.b1().transpose() * &p1 * gi + plant.b2() * &c_inf
        - &b_inf * (plant.c2() + plant.d21() * plant.b1().transpose() * &p1 * gi);
    debug_assert_eq!(b_inf.shape(), (n, p2));
    debug_assert_eq!(c_inf.shape(), (m2, n));
    Ok(HinfDesign { gamma, p1, p2: p2m, a_inf, b_inf, c_inf, l_inf })
}

/// Upper limit for the γ search.
pub const GAMMA_CAP: f64 = 1e6;

/// Smallest feasible γ to within `tol` (absolute) by bisection.
///
/// The upper bracket starts at 1 and doubles until feasible; the lower
/// bracket is 0 or the last infeasible doubling point.
pub fn hinf_gamma_min(plant: &Plant, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let feasible = |g: f64| hinf_central(plant, g).is_ok();
    let mut hi = 1.0;
    let mut lo = 0.0;
    while !feasible(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > GAMMA_CAP {
            return Err(Error::NoFeasibleGamma { cap: GAMMA_CAP });
        }
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// How the observer gain is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum ObserverGainSpec {
    /// Use this gain after verifying that `A + L C2` is stable.
    Explicit(DMatrix<f64>),
    /// `L = -P C2' R^{-1}` from the filter CARE `AP + PA' - P C2' R^{-1} C2 P + Q = 0`.
    DualCare { q: DMatrix<f64>, r: DMatrix<f64> },
}

pub fn pick_observer_gain(plant: &Plant, spec: &ObserverGainSpec) -> Result<DMatrix<f64>> {
    let l = match spec {
        ObserverGainSpec::Explicit(l) => {
            if l.shape() != (plant.n(), plant.p2()) {
                return Err(Error::Dimension(format!(
                    "observer gain is {}x{}, expected {}x{}",
                    l.nrows(),
                    l.ncols(),
                    plant.n(),
                    plant.p2()
                )));
            }
            l.clone()
        }
        ObserverGainSpec::DualCare { q, r } => {
            let p = solve_care(&CareProblem::new(plant.a().transpose(), plant.c2().transpose(), q.clone(), r.clone()))?;
            -(&p * plant.c2().transpose()) * linalg::inverse(r, "observer weight R")?
        }
    };
    let ae = plant.a() + &l * plant.c2();
    if !is_stable(&ae)? {
        return Err(Error::Unstable { what: "A + L C2".into(), abscissa: spectral_abscissa(&ae)? });
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_care() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let p = CareProblem::new(DMatrix::zeros(1, 1), one.clone(), one.clone(), one);
        let x = solve_care(&p).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stable_a_with_zero_weight_gives_zero() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let p = CareProblem::new(a, DMatrix::from_row_slice(2, 1, &[0.0, 1.0]), DMatrix::zeros(2, 2), DMatrix::identity(1, 1));
        assert!(solve_care(&p).unwrap().norm() < 1e-12);
    }

    #[test]
    fn indefinite_r_rejected_by_positive_definite_entry_point() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let p = CareProblem::new(DMatrix::zeros(1, 1), one.clone(), one.clone(), -one);
        assert!(matches!(solve_care(&p), Err(Error::InvalidArgument(_))));
    }
}
