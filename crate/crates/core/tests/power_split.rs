mod common;

use std::f64::consts::PI;

use common::{double_integrator, observer_gain};
use mocc_core::analysis::{decompose_with_nominal, dependency_objective, theorem1_decomposition, theorem2_bound, worst_dependency, LemmaDecomposition};
use mocc_core::controller::LoopController;
use mocc_core::feedforward::AnticausalFeedforward;
use mocc_core::linalg::{CMatrix, C64};
use mocc_core::lti::{Plant, StateSpace};
use mocc_core::riccati::{hinf_central, lqt_synthesize};
use mocc_core::signal::{SignalSpec, Tone};
use mocc_core::sim::{build_sim_model, run_from, simulate, SimOptions};
use mocc_core::youla::{assemble_composite, NominalBlock, Tracking};
use mocc_core::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAMMA: f64 = 0.4108;

struct Bench {
    plant: Plant,
    mocc: LoopController,
    dec: LemmaDecomposition,
}

fn bench() -> Bench {
    let plant = double_integrator();
    let lqt = lqt_synthesize(&plant).unwrap();
    let ff = AnticausalFeedforward::lqt(&plant, &lqt).unwrap();
    let k = hinf_central(&plant, GAMMA).unwrap().controller();
    let comp = assemble_composite(&plant, NominalBlock::Shared { f: lqt.f.clone() }, &k, &observer_gain(), 1.0, Tracking::Feedforward(ff.clone())).unwrap();
    let nominal = LoopController::observer_feedback("lqt", &plant, &lqt.f, &observer_gain(), Some(ff)).unwrap();
    let dec = decompose_with_nominal(&plant, &nominal, &k).unwrap();
    Bench { mocc: comp.to_loop_controller().unwrap(), plant, dec }
}

fn r() -> SignalSpec {
    SignalSpec::scalar(0.0, vec![Tone::sine(1.0, PI)]).unwrap()
}

fn w1() -> SignalSpec {
    SignalSpec::scalar(0.0, vec![Tone::sine(1.0, 1.5 * PI)]).unwrap()
}

fn w2() -> SignalSpec {
    SignalSpec::scalar(1.0, vec![Tone::sine(1.0, 4.0 * PI), Tone::sine(1.0, 0.2 * PI)]).unwrap()
}

fn dependency_filter() -> StateSpace {
    let one = DMatrix::from_element(1, 1, 1.0);
    StateSpace::new(DMatrix::from_element(1, 1, 0.01), one.clone(), one, DMatrix::zeros(1, 1)).unwrap()
}

#[test]
fn independent_power_split_is_additive() {
    let b = bench();
    let rep = theorem1_decomposition(&b.dec, &w1(), &r()).unwrap();
    assert!((rep.z_sq - rep.z1_sq - rep.z2_sq).abs() <= 1e-14 * rep.z_sq);
    assert!((rep.z2_sq - 0.0408).abs() / 0.0408 <= 0.02, "‖z2‖² = {}", rep.z2_sq);
}

#[test]
fn independent_power_split_matches_long_simulation() {
    let b = bench();
    let rep = theorem1_decomposition(&b.dec, &w1(), &r()).unwrap();
    let tr = simulate(&b.plant, &b.mocc, &r(), &w1(), &SimOptions::new(1e-3, 2000.0).costs_only()).unwrap();
    let rel = (tr.cost_z - rep.z_sq).abs() / rep.z_sq;
    assert!(rel <= 0.01, "simulated {} vs closed form {}", tr.cost_z, rep.z_sq);
}

#[test]
fn power_split_rejects_shared_frequency() {
    let b = bench();
    let w = SignalSpec::scalar(0.0, vec![Tone::sine(0.5, PI)]).unwrap();
    assert!(matches!(theorem1_decomposition(&b.dec, &w, &r()), Err(Error::NotOrthogonal { .. })));
}

#[test]
fn dependent_power_identity() {
    let b = bench();
    let rep = theorem2_bound(&b.dec, GAMMA, &r(), &w2(), &dependency_filter()).unwrap();
    let rel = (rep.z_sq - rep.z1_sq - rep.z2_tilde_sq).abs() / rep.z_sq;
    assert!(rel <= 1e-6, "identity off by {rel:e}");

    // Simulation from the periodic steady state; all lines share a 10 s period.
    let w3 = w2().with_dependency(dependency_filter()).unwrap();
    let sm = build_sim_model(&b.plant, &b.mocc, &r(), &w3).unwrap();
    let x0 = sm.steady_state().unwrap().eval(0.0);
    let tr = run_from(&sm, &x0, &SimOptions::new(1e-3, 20.0).costs_only()).unwrap();
    let rel = (tr.cost_z - rep.z_sq).abs() / rep.z_sq;
    assert!(rel <= 1e-6, "simulated {} vs closed form {} ({rel:e})", tr.cost_z, rep.z_sq);
}

#[test]
fn dependent_bound_status_is_reported() {
    let b = bench();
    let rep = theorem2_bound(&b.dec, GAMMA, &r(), &w2(), &dependency_filter()).unwrap();
    assert_eq!(rep.bound_holds, rep.z_sq <= rep.bound * (1.0 + 1e-12));
    assert!(rep.t1_hinf < GAMMA);
}

fn random_stable_filter(rng: &mut ChaCha8Rng) -> StateSpace {
    let order = rng.gen_range(1..=3);
    let mut a = DMatrix::from_fn(order, order, |_, _| rng.gen_range(-2.0..2.0));
    let shift = mocc_core::linalg::spectral_abscissa(&a).unwrap() + rng.gen_range(0.05..2.0);
    a -= DMatrix::identity(order, order) * shift;
    let b = DMatrix::from_fn(order, 1, |_, _| rng.gen_range(-3.0..3.0));
    let c = DMatrix::from_fn(1, order, |_, _| rng.gen_range(-3.0..3.0));
    let d = DMatrix::from_fn(1, 1, |_, _| rng.gen_range(-1.0..1.0));
    StateSpace::new(a, b, c, d).unwrap()
}

#[test]
fn worst_dependency_dominates_random_filters() {
    let b = bench();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let filters: Vec<StateSpace> = (0..200).map(|_| random_stable_filter(&mut rng)).collect();
    let v = DVector::from_element(1, C64::new(1.0, 0.0));
    for i in 0..20 {
        let omega = 10f64.powf(-2.0 + 4.0 * i as f64 / 19.0);
        let worst = worst_dependency(&b.dec, GAMMA, omega).unwrap();
        let sup = worst.supremum(&v);
        let at_worst = dependency_objective(&b.dec, GAMMA, omega, &worst.w_tilde, &v).unwrap();
        assert!((at_worst - sup).abs() <= 1e-9 * (1.0 + sup.abs()), "ω = {omega}: {at_worst} vs {sup}");
        for f in &filters {
            let wj: CMatrix = f.response(omega).unwrap();
            let val = dependency_objective(&b.dec, GAMMA, omega, &wj, &v).unwrap();
            assert!(val <= sup + 1e-9 * (1.0 + sup.abs()), "ω = {omega}: {val} > {sup}");
        }
    }
}
