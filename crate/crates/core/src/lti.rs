//! Continuous-time LTI value types and primitive operations.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, all_finite, eigenvalues, eye, hstack, min_singular_value_complex, solve_complex, to_complex, vstack, zeros,
    CMatrix, C64,
};

pub use crate::linalg::{is_stable, spectral_abscissa};

/// Realization `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}, expected square", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, A has {}", b.nrows(), n)));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C has {} columns, A has {}", c.ncols(), n)));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            if !all_finite(m) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// A memoryless gain `y = D u`.
    pub fn gain(d: DMatrix<f64>) -> Result<Self> {
        let (p, m) = d.shape();
        Self::new(zeros(0, 0), zeros(0, m), zeros(p, 0), d)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn nstates(&self) -> usize {
        self.a.nrows()
    }
    pub fn ninputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn noutputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        (self.a, self.b, self.c, self.d)
    }

    pub fn is_stable(&self) -> Result<bool> {
        is_stable(&self.a)
    }

    /// Transfer matrix at an arbitrary complex point `s`.
    pub fn eval(&self, s: C64) -> Result<CMatrix> {
        let n = self.nstates();
        let d = to_complex(&self.d);
        if n == 0 {
            return Ok(d);
        }
        let mut m = to_complex(&self.a).map(|z| -z);
        for i in 0..n {
            m[(i, i)] += s;
        }
        let x = solve_complex(&m, &to_complex(&self.b)).ok_or(Error::SingularFrequency { omega: s.im })?;
        // Reject near-singular solves that LU accepts but that are numerically meaningless.
        let scale = 1.0 + self.a.norm() + s.norm();
        if min_singular_value_complex(&m) <= 1e-13 * scale {
            return Err(Error::SingularFrequency { omega: s.im });
        }
        Ok(to_complex(&self.c) * x + d)
    }

    /// `C (jωI - A)^{-1} B + D`.
    pub fn response(&self, omega: f64) -> Result<CMatrix> {
        self.eval(C64::new(0.0, omega))
    }

    /// Change of state coordinates `x_new = T x`.
    pub fn transform(&self, t: &DMatrix<f64>) -> Result<Self> {
        let ti = linalg::inverse(t, "similarity transform")?;
        Self::new(t * &self.a * &ti, t * &self.b, &self.c * &ti, self.d.clone())
    }

    /// Keep only the listed input columns.
    pub fn select_inputs(&self, cols: &[usize]) -> Self {
        let b = self.b.select_columns(cols);
        let d = self.d.select_columns(cols);
        Self { a: self.a.clone(), b, c: self.c.clone(), d }
    }

    /// Keep only the listed output rows.
    pub fn select_outputs(&self, rows: &[usize]) -> Self {
        let c = self.c.select_rows(rows);
        let d = self.d.select_rows(rows);
        Self { a: self.a.clone(), b: self.b.clone(), c, d }
    }

    /// Series connection `self` after `first` (`y = self(first(u))`).
    pub fn after(&self, first: &StateSpace) -> Result<Self> {
        if first.noutputs() != self.ninputs() {
            return Err(Error::Dimension("series connection width mismatch".into()));
        }
        let (n1, n2) = (first.nstates(), self.nstates());
        let a = linalg::block(&[
            &[&first.a, &zeros(n1, n2)],
            &[&(&self.b * &first.c), &self.a],
        ]);
        let b = vstack(&[&first.b, &(&self.b * &first.d)]);
        let c = hstack(&[&(&self.d * &first.c), &self.c]);
        let d = &self.d * &first.d;
        Self::new(a, b, c, d)
    }

    /// Parallel sum with a common input and stacked inputs of equal width.
    pub fn plus(&self, other: &StateSpace) -> Result<Self> {
        if self.ninputs() != other.ninputs() || self.noutputs() != other.noutputs() {
            return Err(Error::Dimension("parallel connection shape mismatch".into()));
        }
        Self::new(
            linalg::block_diag(&[&self.a, &other.a]),
            vstack(&[&self.b, &other.b]),
            hstack(&[&self.c, &other.c]),
            &self.d + &other.d,
        )
    }

    /// Side-by-side systems sharing the output: `y = G1 u1 + G2 u2`.
    pub fn hjoin(&self, other: &StateSpace) -> Result<Self> {
        if self.noutputs() != other.noutputs() {
            return Err(Error::Dimension("horizontal join needs equal output widths".into()));
        }
        Self::new(
            linalg::block_diag(&[&self.a, &other.a]),
            linalg::block_diag(&[&self.b, &other.b]),
            hstack(&[&self.c, &other.c]),
            hstack(&[&self.d, &other.d]),
        )
    }
}

/// `C (jωI - A)^{-1} B + D`; errors when `jω` is an eigenvalue of `A`.
pub fn frequency_response(sys: &StateSpace, omega: f64) -> Result<CMatrix> {
    sys.response(omega)
}

/// Generalized plant
///
/// ```text
/// x' = A x + B1 w + B2 u
/// z  = C1 (C2 x - r) + D12 u
/// y  = C2 x + D21 w
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    a: DMatrix<f64>,
    b1: DMatrix<f64>,
    b2: DMatrix<f64>,
    c1: DMatrix<f64>,
    c2: DMatrix<f64>,
    d12: DMatrix<f64>,
    d21: DMatrix<f64>,
}

impl Plant {
    pub fn new(
        a: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
        c1: DMatrix<f64>,
        c2: DMatrix<f64>,
        d12: DMatrix<f64>,
        d21: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let dim = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::Dimension(what.to_string())) };
        dim(a.ncols() == n, "plant A must be square")?;
        dim(b1.nrows() == n, "B1 rows must match A")?;
        dim(b2.nrows() == n, "B2 rows must match A")?;
        dim(c2.ncols() == n, "C2 columns must match A")?;
        dim(c1.ncols() == c2.nrows(), "C1 columns must match C2 rows")?;
        dim(d12.nrows() == c1.nrows() && d12.ncols() == b2.ncols(), "D12 must be p1 x m2")?;
        dim(d21.nrows() == c2.nrows() && d21.ncols() == b1.ncols(), "D21 must be p2 x m1")?;
        for (m, name) in [
            (&a, "A"),
            (&b1, "B1"),
            (&b2, "B2"),
            (&c1, "C1"),
            (&c2, "C2"),
            (&d12, "D12"),
            (&d21, "D21"),
        ] {
            if !all_finite(m) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(Self { a, b1, b2, c1, c2, d12, d21 })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b1(&self) -> &DMatrix<f64> {
        &self.b1
    }
    pub fn b2(&self) -> &DMatrix<f64> {
        &self.b2
    }
    pub fn c1(&self) -> &DMatrix<f64> {
        &self.c1
    }
    pub fn c2(&self) -> &DMatrix<f64> {
        &self.c2
    }
    pub fn d12(&self) -> &DMatrix<f64> {
        &self.d12
    }
    pub fn d21(&self) -> &DMatrix<f64> {
        &self.d21
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    /// Disturbance width `m1`.
    pub fn m1(&self) -> usize {
        self.b1.ncols()
    }
    /// Control width `m2`.
    pub fn m2(&self) -> usize {
        self.b2.ncols()
    }
    /// Performance output width `p1`.
    pub fn p1(&self) -> usize {
        self.c1.nrows()
    }
    /// Measurement width `p2` (also the reference width).
    pub fn p2(&self) -> usize {
        self.c2.nrows()
    }

    /// `R1 = D12' D12`.
    pub fn r1(&self) -> DMatrix<f64> {
        self.d12.transpose() * &self.d12
    }

    /// `R2 = D21 D21'`.
    pub fn r2(&self) -> DMatrix<f64> {
        &self.d21 * self.d21.transpose()
    }

    /// Performance weighting on the state, `C1 C2`.
    pub fn c1c2(&self) -> DMatrix<f64> {
        &self.c1 * &self.c2
    }

    /// The measured part `(A, B2, C2, 0)`.
    pub fn nominal(&self) -> StateSpace {
        StateSpace {
            a: self.a.clone(),
            b: self.b2.clone(),
            c: self.c2.clone(),
            d: zeros(self.p2(), self.m2()),
        }
    }
}

/// Strictly increasing list of non-negative angular frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid(Vec<f64>);

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("grid frequencies must be finite and non-negative".into()));
        }
        if omegas.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidArgument("grid frequencies must be strictly increasing".into()));
        }
        Ok(Self(omegas))
    }

    /// `count` points spaced logarithmically from `10^lo` to `10^hi`.
    pub fn logspace(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 1 {
            return Self::new(vec![10f64.powf(lo)]);
        }
        let step = (hi - lo) / (count as f64 - 1.0);
        Self::new((0..count).map(|i| 10f64.powf(lo + step * i as f64)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Relative rank tolerance used by the PBH and invariant-zero tests.
const RANK_TOL: f64 = 1e-7;

/// Eigenvalues that are not strictly stable (real part at or above the margin).
fn unstable_modes(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    Ok(eigenvalues(a)?
        .into_iter()
        .filter(|z| z.re >= -linalg::STABILITY_MARGIN)
        .collect())
}

fn pbh_full_rank(a: &DMatrix<f64>, extra: &DMatrix<f64>, lam: C64) -> bool {
    let n = a.nrows();
    let mut m = to_complex(a);
    for i in 0..n {
        m[(i, i)] -= lam;
    }
    let mut aug = CMatrix::zeros(n, n + extra.ncols());
    aug.view_mut((0, 0), (n, n)).copy_from(&m);
    aug.view_mut((0, n), (n, extra.ncols())).copy_from(&to_complex(extra));
    let s = aug.clone().svd(false, false).singular_values;
    let scale = aug.norm().max(1.0);
    s.len() == n && s.min() > RANK_TOL * scale
}

/// PBH verdicts for the measured part of a plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PbhReport {
    pub stabilizable: bool,
    pub detectable: bool,
}

/// Stabilizability of `(A, B)` by the PBH test.
pub fn is_stabilizable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<bool> {
    Ok(unstable_modes(a)?.into_iter().all(|lam| pbh_full_rank(a, b, lam)))
}

/// Detectability of `(C, A)` by the dual PBH test.
pub fn is_detectable(c: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<bool> {
    is_stabilizable(&a.transpose(), &c.transpose())
}

pub fn check_stabilizable_detectable(plant: &Plant) -> Result<PbhReport> {
    Ok(PbhReport {
        stabilizable: is_stabilizable(plant.a(), plant.b2())?,
        detectable: is_detectable(plant.c2(), plant.a())?,
    })
}

/// Finite invariant zeros of `(A, B, C, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantZeros {
    pub zeros: Vec<C64>,
    /// The Rosenbrock pencil loses rank for every `λ`; the system has no
    /// well-defined set of isolated zeros.
    pub degenerate: bool,
}

impl InvariantZeros {
    /// True if some zero lies on the imaginary axis (`|Re| < 1e-8`) or the
    /// pencil is degenerate.
    pub fn touches_imaginary_axis(&self) -> bool {
        self.degenerate || self.zeros.iter().any(|z| z.re.abs() < 1e-8)
    }
}

fn rosenbrock(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>, lam: C64) -> CMatrix {
    let n = a.nrows();
    let top = hstack(&[a, b]);
    let bottom = hstack(&[c, d]);
    let mut p = to_complex(&vstack(&[&top, &bottom]));
    for i in 0..n {
        p[(i, i)] -= lam;
    }
    p
}

fn numerical_rank(m: &CMatrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let cutoff = RANK_TOL * s.max().max(1.0);
    s.iter().filter(|&&v| v > cutoff).count()
}

/// Invariant zeros: values of `λ` where the Rosenbrock pencil
/// `[A - λI, B; C, D]` drops below its normal rank.
///
/// Non-square pencils are squared by a seeded random projection; the
/// spurious zeros this introduces are filtered by checking the rank of the
/// original pencil at each candidate.
pub fn invariant_zeros(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<InvariantZeros> {
    let n = a.nrows();
    let (p, m) = (c.nrows(), b.ncols());
    if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.shape() != (p, m) {
        return Err(Error::Dimension("invariant_zeros: inconsistent realization".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2e40);
    let full = n + p.min(m);
    let probe = C64::new(rng.gen_range(0.3..0.9), rng.gen_range(0.3..0.9)) * (1.0 + a.norm());
    let probe2 = C64::new(-rng.gen_range(0.3..0.9), rng.gen_range(1.1..1.9)) * (1.0 + a.norm());
    let normal_rank = numerical_rank(&rosenbrock(a, b, c, d, probe)).max(numerical_rank(&rosenbrock(a, b, c, d, probe2)));
    if normal_rank < full {
        return Ok(InvariantZeros { zeros: Vec::new(), degenerate: true });
    }
    // Square the pencil: k = min(p, m) columns of inputs / rows of outputs.
    let k = p.min(m);
    let (bs, cs, ds) = if p > m {
        let proj = DMatrix::from_fn(m, p, |_, _| rng.gen_range(-1.0..1.0));
        (b.clone(), &proj * c, &proj * d)
    } else if m > p {
        let proj = DMatrix::from_fn(m, p, |_, _| rng.gen_range(-1.0..1.0));
        (b * &proj, c.clone(), d * &proj)
    } else {
        (b.clone(), c.clone(), d.clone())
    };
    let big_m = vstack(&[&hstack(&[a, &bs]), &hstack(&[&cs, &ds])]);
    let mut big_n = zeros(n + k, n + k);
    big_n.view_mut((0, 0), (n, n)).fill_with_identity();

    let scale = 1.0 + big_m.norm();
    // Defective infinite eigenvalues come back as large, shift-dependent
    // finite values; genuine zeros are reproduced by two different shifts.
    let first = shifted_candidates(&big_m, &big_n, 0.37 * scale, scale)?;
    let second = shifted_candidates(&big_m, &big_n, -0.61 * scale, scale)?;
    let mut used = vec![false; second.len()];
    let mut candidates = Vec::new();
    for lam in first {
        let tol = 1e-5 * (scale + lam.norm());
        let hit = second
            .iter()
            .enumerate()
            .filter(|(j, mu)| !used[*j] && (**mu - lam).norm() <= tol)
            .min_by(|x, y| (*x.1 - lam).norm().total_cmp(&(*y.1 - lam).norm()));
        if let Some((j, _)) = hit {
            used[j] = true;
            candidates.push(lam);
        }
    }
    let mut zeros_out: Vec<C64> = candidates
        .into_iter()
        .filter(|&lam| {
            let pl = rosenbrock(a, b, c, d, lam);
            let s = pl.clone().svd(false, false).singular_values;
            let smax = s.max().max(1.0);
            let smin = if s.len() < full { 0.0 } else { s.min() };
            smin <= 1e-6 * smax
        })
        .collect();
    linalg::sort_eigenvalues(&mut zeros_out);
    Ok(InvariantZeros { zeros: zeros_out, degenerate: false })
}

fn shifted_candidates(m: &DMatrix<f64>, n: &DMatrix<f64>, sigma: f64, scale: f64) -> Result<Vec<C64>> {
    let shifted = m - n * sigma;
    let x = linalg::solve(&shifted, n, "shifted pencil")?;
    let xnorm = x.norm().max(f64::MIN_POSITIVE);
    Ok(eigenvalues(&x)?
        .into_iter()
        .filter(|mu| mu.norm() > 1e-12 * xnorm)
        .map(|mu| C64::new(sigma, 0.0) + C64::new(1.0, 0.0) / mu)
        .filter(|lam| lam.norm() <= 1e8 * scale)
        .collect())
}

/// Per-item verdicts for the standard output-feedback H-infinity assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// `[A - jωI, B1; C2, D21]` has full row rank for all `ω`.
    pub disturbance_pencil_full_row_rank: bool,
    /// `[A - jωI, B2; C1C2, D12]` has full column rank for all `ω`.
    pub control_pencil_full_column_rank: bool,
    pub r1_positive_definite: bool,
    pub r2_positive_definite: bool,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.disturbance_pencil_full_row_rank
            && self.control_pencil_full_column_rank
            && self.r1_positive_definite
            && self.r2_positive_definite
    }
}

fn positive_definite(m: &DMatrix<f64>) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    let sym = (m + m.transpose()) * 0.5;
    let ev = sym.clone().symmetric_eigen().eigenvalues;
    ev.min() > 1e-12 * sym.norm().max(1.0)
}

pub fn check_standard_assumptions(plant: &Plant) -> Result<AssumptionReport> {
    let row_ok = plant.p2() <= plant.m1() && {
        let z = invariant_zeros(plant.a(), plant.b1(), plant.c2(), plant.d21())?;
        !z.touches_imaginary_axis()
    };
    let col_ok = plant.p1() >= plant.m2() && {
        let z = invariant_zeros(plant.a(), plant.b2(), &plant.c1c2(), plant.d12())?;
        !z.touches_imaginary_axis()
    };
    Ok(AssumptionReport {
        disturbance_pencil_full_row_rank: row_ok,
        control_pencil_full_column_rank: col_ok,
        r1_positive_definite: positive_definite(&plant.r1()),
        r2_positive_definite: positive_definite(&plant.r2()),
    })
}

/// Feedback interconnection. With `sign = -1` and external input `v`,
/// `u = v - K y`, `y = G u`; the result maps `v` to `y`.
pub fn interconnect_feedback(g: &StateSpace, k: &StateSpace, sign: f64) -> Result<StateSpace> {
    if k.ninputs() != g.noutputs() || k.noutputs() != g.ninputs() {
        return Err(Error::Dimension("feedback interconnection widths do not match".into()));
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::InvalidArgument("feedback sign must be +1 or -1".into()));
    }
    let p = g.noutputs();
    let e_mat = eye(p) - g.d() * k.d() * sign;
    let e = linalg::inverse(&e_mat, "I - D_G D_K").map_err(|_| Error::AlgebraicLoop)?;
    if e_mat.clone().svd(false, false).singular_values.min() < 1e-12 * e_mat.norm().max(1.0) {
        return Err(Error::AlgebraicLoop);
    }
    // y = E (Cg xg + s Dg Ck xk + Dg v)
    let y_xg = &e * g.c();
    let y_xk = &e * g.d() * k.c() * sign;
    let y_v = &e * g.d();
    // u = v + s Ck xk + s Dk y
    let u_xg = k.d() * &y_xg * sign;
    let u_xk = k.c() * sign + k.d() * &y_xk * sign;
    let u_v = eye(g.ninputs()) + k.d() * &y_v * sign;
    let a = linalg::block(&[
        &[&(g.a() + g.b() * &u_xg), &(g.b() * &u_xk)],
        &[&(k.b() * &y_xg), &(k.a() + k.b() * &y_xk)],
    ]);
    let b = vstack(&[&(g.b() * &u_v), &(k.b() * &y_v)]);
    let c = hstack(&[&y_xg, &y_xk]);
    StateSpace::new(a, b, c, y_v)
}

/// Zero-order-hold propagator over one step `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretized {
    pub ad: DMatrix<f64>,
    pub bd: DMatrix<f64>,
}

/// `Ad = exp(A h)`, `Bd = ∫_0^h exp(A τ) dτ B`, via the exponential of the
/// augmented matrix `[[A, B], [0, 0]] h`.
pub fn exact_discretize(sys: &StateSpace, h: f64) -> Result<Discretized> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let (n, m) = (sys.nstates(), sys.ninputs());
    let mut aug = zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(sys.a());
    aug.view_mut((0, n), (n, m)).copy_from(sys.b());
    let e = (aug * h).exp();
    Ok(Discretized {
        ad: e.view((0, 0), (n, n)).clone_owned(),
        bd: e.view((0, n), (n, m)).clone_owned(),
    })
}

/// Orthonormal basis of the controllable subspace of `(A, B)`, grown by
/// block Arnoldi with re-orthogonalization.
pub fn controllable_subspace(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut frontier: Vec<DVector<f64>> = Vec::new();
    let bscale = b.norm().max(1.0);
    for j in 0..b.ncols() {
        if let Some(v) = orthogonalize(b.column(j).clone_owned(), &basis, tol * bscale) {
            basis.push(v.clone());
            frontier.push(v);
        }
    }
    let ascale = a.norm().max(1.0);
    while !frontier.is_empty() && basis.len() < n {
        let mut next = Vec::new();
        for v in &frontier {
            if let Some(w) = orthogonalize(a * v, &basis, tol * ascale) {
                basis.push(w.clone());
                next.push(w);
                if basis.len() == n {
                    break;
                }
            }
        }
        frontier = next;
    }
    let mut out = zeros(n, basis.len());
    for (j, v) in basis.iter().enumerate() {
        out.set_column(j, v);
    }
    out
}

fn orthogonalize(mut v: DVector<f64>, basis: &[DVector<f64>], cutoff: f64) -> Option<DVector<f64>> {
    for _ in 0..2 {
        for q in basis {
            let proj = q.dot(&v);
            v.axpy(-proj, q, 1.0);
        }
    }
    let nv = v.norm();
    (nv > cutoff).then(|| v / nv)
}

/// Remove uncontrollable then unobservable states (orthogonal staircase).
pub fn minimal_realization(sys: &StateSpace, tol: f64) -> Result<StateSpace> {
    let qc = controllable_subspace(sys.a(), sys.b(), tol);
    let a1 = qc.transpose() * sys.a() * &qc;
    let b1 = qc.transpose() * sys.b();
    let c1 = sys.c() * &qc;
    let qo = controllable_subspace(&a1.transpose(), &c1.transpose(), tol);
    StateSpace::new(
        qo.transpose() * &a1 * &qo,
        qo.transpose() * &b1,
        &c1 * &qo,
        sys.d().clone(),
    )
}
