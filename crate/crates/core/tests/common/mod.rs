#![allow(dead_code)]

pub mod bench;

use mocc_core::lti::Plant;
use nalgebra::DMatrix;

pub fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(r, c, v)
}

/// Double integrator with a weighted tracking output.
pub fn double_integrator() -> Plant {
    Plant::new(
        m(2, 2, &[0., 1., 0., 0.]),
        m(2, 1, &[1., 10.]),
        m(2, 1, &[0., 1.]),
        m(2, 1, &[1., 0.]),
        m(1, 2, &[1., 0.]),
        m(2, 1, &[0., 0.03]),
        m(1, 1, &[0.01]),
    )
    .unwrap()
}

pub fn observer_gain() -> DMatrix<f64> {
    m(2, 1, &[-100., -1000.])
}

use mocc_core::linalg;
use mocc_core::lti::StateSpace;
use mocc_core::riccati::{solve_care, CareProblem};
use mocc_core::youla::ControllerRealization;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// `u = F x̂ + D (y - C2 x̂)` with `x̂' = A x̂ + B2 u + L(C2 x̂ - y)`;
/// stabilizing for any `D` when `A + B2 F` and `A + L C2` are stable.
pub fn observer_controller(plant: &Plant, f: &DMatrix<f64>, l: &DMatrix<f64>, d: &DMatrix<f64>) -> StateSpace {
    let cc = f - d * plant.c2();
    StateSpace::new(
        plant.a() + plant.b2() * &cc + l * plant.c2(),
        plant.b2() * d - l,
        cc,
        d.clone(),
    )
    .unwrap()
}

pub fn lqr(a: &DMatrix<f64>, b: &DMatrix<f64>, q: f64, r: f64) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), b.ncols());
    let p = CareProblem::new(a.clone(), b.clone(), DMatrix::identity(n, n) * q, DMatrix::identity(m, m) * r);
    let x = solve_care(&p).unwrap();
    -p.gain(&x).unwrap()
}

/// Observer gain with `A + L C` stable.
pub fn kalman(a: &DMatrix<f64>, c: &DMatrix<f64>, q: f64, r: f64) -> DMatrix<f64> {
    lqr(&a.transpose(), &c.transpose(), q, r).transpose()
}

/// A random plant together with a general nominal controller `C`, a
/// state-feedback gain `F`, a static gain `Dc`, a robust controller `K`
/// and two observer gains.
pub struct RandomCase {
    pub plant: Plant,
    pub f: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub l_alt: DMatrix<f64>,
    pub c: ControllerRealization,
    pub c_alt: ControllerRealization,
    pub dc: DMatrix<f64>,
    pub k: StateSpace,
}

pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=6);
    let m1 = rng.gen_range(1..=2);
    let m2 = rng.gen_range(1..=2);
    let p2 = rng.gen_range(1..=2);
    let p1 = p2 + m2;
    let b2 = randn(&mut rng, n, m2, 1.0);
    let c2 = randn(&mut rng, p2, n, 1.0);
    let dc = randn(&mut rng, m2, p2, 0.5);
    // A + B2 Dc C2 is a shifted random matrix, so Dc is stabilizing.
    let mut abar = randn(&mut rng, n, n, 1.0 / (n as f64).sqrt());
    let shift = linalg::spectral_abscissa(&abar).unwrap() + rng.gen_range(0.2..1.0);
    abar -= DMatrix::identity(n, n) * shift;
    let a = &abar - &b2 * &dc * &c2;
    let plant = Plant::new(
        a,
        randn(&mut rng, n, m1, 1.0),
        b2,
        randn(&mut rng, p1, p2, 1.0),
        c2,
        randn(&mut rng, p1, m2, 1.0),
        randn(&mut rng, p2, m1, 0.3),
    )
    .unwrap();
    let f = lqr(plant.a(), plant.b2(), 1.0, 1.0);
    let l = kalman(plant.a(), plant.c2(), 1.0, 1.0);
    let l_alt = kalman(plant.a(), plant.c2(), 4.0, 0.5);
    let fc = lqr(plant.a(), plant.b2(), 2.0, 0.7);
    let lo = kalman(plant.a(), plant.c2(), 0.5, 1.5);
    let dnom = randn(&mut rng, m2, p2, 0.3);
    let csys = observer_controller(&plant, &fc, &lo, &dnom);
    let c = ControllerRealization::new(csys.clone(), -plant.b2().clone()).unwrap();
    let lc_alt = kalman(csys.a(), csys.c(), 1.0, 1.0);
    let c_alt = ControllerRealization::new(csys, lc_alt).unwrap();
    let fk = lqr(plant.a(), plant.b2(), 5.0, 0.2);
    let lk = kalman(plant.a(), plant.c2(), 3.0, 0.3);
    let dk = randn(&mut rng, m2, p2, 0.3);
    let k = observer_controller(&plant, &fk, &lk, &dk);
    RandomCase { plant, f, l, l_alt, c, c_alt, dc, k }
}
