mod common;

use common::{double_integrator, observer_gain};
use mocc_core::analysis::{assemble_closed_loop, close_loop, hinf_norm, ClosedLoopSystem};
use mocc_core::controller::LoopController;
use mocc_core::feedforward::AnticausalFeedforward;
use mocc_core::riccati::{hinf_central, lqt_synthesize};
use mocc_core::youla::{assemble_composite, NominalBlock, Tracking};

#[test]
fn benchmark_hinf_norms() {
    let plant = double_integrator();
    let lqt = lqt_synthesize(&plant).unwrap();
    let k = hinf_central(&plant, 0.4108).unwrap().controller();
    let ff = AnticausalFeedforward::lqt(&plant, &lqt).unwrap();
    let comp = assemble_composite(&plant, NominalBlock::Shared { f: lqt.f.clone() }, &k, &observer_gain(), 1.0, Tracking::Feedforward(ff.clone())).unwrap();
    let cl = assemble_closed_loop(&plant, &comp).unwrap();
    let mocc = hinf_norm(&cl.w_channel().unwrap(), 1e-9).unwrap();
    let lq = LoopController::observer_feedback("lqt", &plant, &lqt.f, &observer_gain(), Some(ff)).unwrap();
    let cl2 = ClosedLoopSystem::from_loop(&close_loop(&plant, &lq).unwrap());
    let lqn = hinf_norm(&cl2.w_channel().unwrap(), 1e-9).unwrap();
    println!("mocc {mocc} lqt {lqn}");
    assert!((mocc - 0.4108).abs() < 1e-3);
    assert!((lqn - 0.6835).abs() < 1e-3);
}
