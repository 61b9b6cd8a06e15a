mod common;

use common::*;
use mocc_core::analysis::{close_loop, hinf_norm, ClosedLoopSystem};
use mocc_core::controller::LoopController;
use mocc_core::linalg;
use mocc_core::riccati::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn lqt_gain_on_double_integrator() {
    let d = lqt_synthesize(&double_integrator()).unwrap();
    assert!((d.f[(0, 0)] + 33.33).abs() / 33.33 < 0.01, "F = {}", d.f);
    assert!((d.f[(0, 1)] + 8.17).abs() / 8.17 < 0.01, "F = {}", d.f);
}

#[test]
fn benchmark_gamma_is_feasible() {
    let p = double_integrator();
    let h = hinf_central(&p, 0.4108).unwrap();
    assert!(h.p1.symmetric_eigenvalues().min() >= -1e-10);
    assert!(hinf_central(&p, 0.40).is_err());
    assert!((&h.l_inf - observer_gain()).norm() <= 1e-6 * 1000.0, "L = {}", h.l_inf);
}

/// Just above the computed optimum the central controller attains a
/// closed-loop norm at or below the level it was designed for.
#[test]
fn central_controller_meets_its_level() {
    let p = double_integrator();
    let g = hinf_gamma_min(&p, 1e-4).unwrap();
    for level in [g + 2e-4, 0.4108, 0.5, 1.0] {
        let k = hinf_central(&p, level).unwrap().controller();
        let ctrl = LoopController::output_feedback("k", &k, false).unwrap();
        let cl = ClosedLoopSystem::from_loop(&close_loop(&p, &ctrl).unwrap());
        let norm = hinf_norm(&cl.w_channel().unwrap(), 1e-9).unwrap();
        assert!(norm < level, "level {level}: norm {norm}");
    }
}

#[test]
fn care_residuals_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 1..=8 {
        for m in 1..=3 {
            let a = randn(&mut rng, n, n, 1.0);
            let b = randn(&mut rng, n, m, 1.0);
            let qh = randn(&mut rng, n, n, 1.0);
            let rh = randn(&mut rng, m, m, 1.0);
            let q = &qh * qh.transpose() + nalgebra::DMatrix::identity(n, n) * 1e-3;
            let r = &rh * rh.transpose() + nalgebra::DMatrix::identity(m, m);
            let p = CareProblem::new(a, b, q, r);
            let x = solve_care(&p).unwrap();
            let res = p.residual(&x).unwrap().norm();
            assert!(res <= 1e-8 * (1.0 + x.norm()), "n={n} m={m}: residual {res:e}");
            assert!(linalg::is_stable(&p.closed_loop(&x).unwrap()).unwrap());
            assert!((&x - x.transpose()).norm() <= 1e-10 * (1.0 + x.norm()));
        }
    }
}

#[test]
fn benchmark_riccati_residuals() {
    let p = double_integrator();
    let d = lqt_synthesize(&p).unwrap();
    let h = hinf_central(&p, 0.4108).unwrap();
    for x in [&d.pi, &h.p1, &h.p2] {
        assert!(x.iter().all(|v| v.is_finite()));
    }
    let prob = CareProblem::new(p.a().clone(), p.b2().clone(), p.c1c2().transpose() * p.c1c2(), p.r1())
        .with_cross(p.c1c2().transpose() * p.d12());
    let res = prob.residual(&d.pi).unwrap().norm();
    assert!(res <= 1e-8 * (1.0 + d.pi.norm()));
}
