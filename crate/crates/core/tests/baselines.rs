mod common;

use common::bench::{controllers, dobc_design, reference, GAMMA};
use common::double_integrator;
use mocc_core::analysis::{close_loop, hinf_norm, ClosedLoopSystem};
use mocc_core::baselines::{dobc_compensation_gain, hinf_tracking_synthesize_with, HinfFeedforward};
use mocc_core::controller::LoopController;
use mocc_core::linalg;
use mocc_core::riccati::lqt_synthesize;
use mocc_core::signal::SignalSpec;
use mocc_core::sim::{simulate, SimOptions};

fn w_norm(ctrl: &LoopController) -> f64 {
    let cl = ClosedLoopSystem::from_loop(&close_loop(&double_integrator(), ctrl).unwrap());
    hinf_norm(&cl.w_channel().unwrap(), 1e-9).unwrap()
}

#[test]
fn dobc_error_dynamics() {
    let plant = double_integrator();
    let d = dobc_design(&plant);
    let mut ev = linalg::eigenvalues(&d.error_matrix(&plant)).unwrap();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let expect = [(-88.73, 0.0), (-11.27, 0.0), (-1.0, -5.59), (-1.0, 5.59)];
    for (z, (re, im)) in ev.iter().zip(expect) {
        assert!((z.re - re).abs() < 0.01 && (z.im - im).abs() < 0.01, "{ev:?}");
    }
    assert!((d.f_w[(0, 0)] + 18.165).abs() < 1e-3, "F_w = {}", d.f_w);
}

#[test]
fn dobc_gain_cancels_constant_disturbance() {
    let plant = double_integrator();
    let lqt = lqt_synthesize(&plant).unwrap();
    let fw = dobc_compensation_gain(&plant, &lqt.f).unwrap();
    let af = plant.a() + plant.b2() * &lqt.f;
    let dc = plant.c2() * linalg::solve(&af, &(plant.b1() + plant.b2() * &fw), "").unwrap();
    assert!(dc.norm() < 1e-12);
}

#[test]
fn baseline_norms() {
    let (_, ctrls) = controllers();
    let dobc = w_norm(&ctrls[3]);
    assert!((dobc - 1.0020).abs() / 1.0020 <= 0.01, "DOBC {dobc}");
    let hinf = w_norm(&ctrls[1]);
    assert!((hinf - 0.4108).abs() <= 1e-3, "H∞ tracking {hinf}");
}

#[test]
fn feedforward_does_not_change_robust_channel() {
    let plant = double_integrator();
    for variant in [HinfFeedforward::GameTheoretic, HinfFeedforward::Nominal] {
        let d = hinf_tracking_synthesize_with(&plant, GAMMA, variant).unwrap();
        let with = d.controller(&plant).unwrap();
        let mut without = with.clone();
        without.feedforward = None;
        assert!((w_norm(&with) - w_norm(&without)).abs() <= 1e-12);
    }
    let dobc = dobc_design(&plant).controller(&plant).unwrap();
    let mut bare = dobc.clone();
    bare.feedforward = None;
    assert!((w_norm(&dobc) - w_norm(&bare)).abs() <= 1e-12);
}

/// For large γ the H∞ design approaches LQ tracking.
#[test]
fn hinf_tracking_tends_to_lqt() {
    let plant = double_integrator();
    let (_, ctrls) = controllers();
    let opts = SimOptions::new(1e-3, 100.0).costs_only();
    let zero = SignalSpec::zero(1);
    let lq = simulate(&plant, &ctrls[2], &reference(), &zero, &opts).unwrap().cost_z;
    let mut gaps = Vec::new();
    for gamma in [1.0, 10.0, 1000.0] {
        for variant in [HinfFeedforward::GameTheoretic, HinfFeedforward::Nominal] {
            let c = hinf_tracking_synthesize_with(&plant, gamma, variant).unwrap().controller(&plant).unwrap();
            let cost = simulate(&plant, &c, &reference(), &zero, &opts).unwrap().cost_z;
            gaps.push((cost - lq).abs() / lq);
        }
    }
    assert!(gaps[4] < 0.01 && gaps[5] < 0.01, "{gaps:?}");
    assert!(gaps[4] < gaps[0]);
}
