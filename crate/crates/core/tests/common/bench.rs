//! The double-integrator benchmark: signals and the four controllers.

use std::f64::consts::PI;

use mocc_core::baselines::{dobc_synthesize, hinf_tracking_synthesize_with, DobcDesign, HinfFeedforward};
use mocc_core::controller::LoopController;
use mocc_core::feedforward::AnticausalFeedforward;
use mocc_core::lti::{Plant, StateSpace};
use mocc_core::riccati::{hinf_central, lqt_synthesize};
use mocc_core::signal::{SignalSpec, Tone};
use mocc_core::youla::{assemble_composite, NominalBlock, Tracking};
use nalgebra::DMatrix;

use super::{double_integrator, observer_gain};

pub const GAMMA: f64 = 0.4108;

pub fn reference() -> SignalSpec {
    SignalSpec::scalar(0.0, vec![Tone::sine(1.0, PI)]).unwrap()
}

pub fn w2() -> SignalSpec {
    SignalSpec::scalar(1.0, vec![Tone::sine(1.0, 4.0 * PI), Tone::sine(1.0, 0.2 * PI)]).unwrap()
}

/// `w = 0, w1, w2, w3` in table order.
pub fn disturbances() -> Vec<SignalSpec> {
    let one = DMatrix::from_element(1, 1, 1.0);
    let wf = StateSpace::new(DMatrix::from_element(1, 1, 0.01), one.clone(), one, DMatrix::zeros(1, 1)).unwrap();
    vec![
        SignalSpec::zero(1),
        SignalSpec::scalar(0.0, vec![Tone::sine(1.0, 1.5 * PI)]).unwrap(),
        w2(),
        w2().with_dependency(wf).unwrap(),
    ]
}

pub fn dobc_design(plant: &Plant) -> DobcDesign {
    let lqt = lqt_synthesize(plant).unwrap();
    let om = 1.5 * PI;
    let aw = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -om * om, 0.0]);
    let cw = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let lw = DMatrix::from_row_slice(2, 1, &[-200.0, -1000.0]);
    dobc_synthesize(plant, &aw, &cw, &observer_gain(), &lw, &lqt).unwrap()
}

/// MOCC, H∞ tracking, LQT and DOBC controllers in table order.
pub fn controllers() -> (Plant, Vec<LoopController>) {
    let plant = double_integrator();
    let lqt = lqt_synthesize(&plant).unwrap();
    let ff = AnticausalFeedforward::lqt(&plant, &lqt).unwrap();
    let k = hinf_central(&plant, GAMMA).unwrap().controller();
    let mocc = assemble_composite(&plant, NominalBlock::Shared { f: lqt.f.clone() }, &k, &observer_gain(), 1.0, Tracking::Feedforward(ff.clone()))
        .unwrap()
        .to_loop_controller()
        .unwrap();
    let hinf = hinf_tracking_synthesize_with(&plant, GAMMA, HinfFeedforward::GameTheoretic).unwrap().controller(&plant).unwrap();
    let lq = LoopController::observer_feedback("lqt", &plant, &lqt.f, &observer_gain(), Some(ff)).unwrap();
    let dobc = dobc_design(&plant).controller(&plant).unwrap();
    (plant, vec![mocc, hinf, lq, dobc])
}
