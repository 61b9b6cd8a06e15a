mod common;

use std::f64::consts::PI;

use common::{double_integrator, observer_gain};
use mocc_core::es::{tune_alpha, tune_with, EsConfig, TuneScenario};
use mocc_core::feedforward::AnticausalFeedforward;
use mocc_core::riccati::{hinf_central, lqt_synthesize};
use mocc_core::signal::{SignalSpec, Tone};
use mocc_core::sim::SimOptions;
use mocc_core::youla::{assemble_composite, NominalBlock, Tracking};

fn quadratic(a: f64) -> mocc_core::Result<f64> {
    Ok((a - 1.6).powi(2) + 0.1)
}

fn scenario() -> TuneScenario {
    let plant = double_integrator();
    let lqt = lqt_synthesize(&plant).unwrap();
    let ff = AnticausalFeedforward::lqt(&plant, &lqt).unwrap();
    let k = hinf_central(&plant, 0.4108).unwrap().controller();
    let composite = assemble_composite(&plant, NominalBlock::Shared { f: lqt.f.clone() }, &k, &observer_gain(), 1.0, Tracking::Feedforward(ff)).unwrap();
    TuneScenario {
        plant,
        composite,
        r: SignalSpec::scalar(0.0, vec![Tone::sine(1.0, PI)]).unwrap(),
        w: SignalSpec::scalar(0.0, vec![Tone::sine(1.0, 1.5 * PI)]).unwrap(),
        sim: SimOptions::default().costs_only(),
    }
}

#[test]
fn synthetic_map_with_default_gain() {
    let tr = tune_with(&EsConfig::default(), 100, quadratic).unwrap();
    let last = tr.final_estimate().unwrap();
    assert!((last - 1.6).abs() <= 0.05, "alpha_hat = {last}");
}

#[test]
fn synthetic_trailing_mean_approaches_monotonically() {
    let cfg = EsConfig { a: 0.1, omega_p: 1.8, g: 0.8, h_f: 0.5, alpha0: 1.0 };
    let tr = tune_with(&cfg, 200, quadratic).unwrap();
    assert!(tr.records.iter().all(|r| r.alpha_hat.abs() < 10.0));
    let mut prev = f64::INFINITY;
    for k in 30..=tr.len() {
        let sub = mocc_core::es::TuneTrace { records: tr.records[..k].to_vec() };
        let d = (sub.trailing_mean(20).unwrap() - 1.6).abs();
        assert!(d <= prev + 1e-12, "iteration {k}: {d} > {prev}");
        prev = d;
    }
}

#[test]
fn benchmark_tuning() {
    let sc = scenario();
    let cfg = EsConfig { a: 0.1, omega_p: 1.8, g: 60.0, h_f: 0.5, alpha0: 1.0 };
    let tr = tune_alpha(&sc, &cfg, 100).unwrap();
    let mean = tr.trailing_mean(20).unwrap();
    let j = sc.cost(mean).unwrap();
    println!("trailing mean {mean}, J = {j}");
    assert!((mean - 1.6).abs() <= 0.15);
    assert!(j <= 0.11);
}

#[test]
fn benchmark_endpoints() {
    let sc = scenario();
    let j0 = sc.cost(0.0).unwrap();
    let j1 = sc.cost(1.0).unwrap();
    assert!((j0 - 0.2654).abs() / 0.2654 <= 0.05, "J(0) = {j0}");
    assert!((j1 - 0.1256).abs() / 0.1256 <= 0.05, "J(1) = {j1}");
}

#[test]
fn benchmark_cost_is_unimodal_on_grid() {
    let sc = scenario();
    let js: Vec<f64> = (0..=25).map(|i| sc.cost(0.1 * i as f64).unwrap()).collect();
    let imin = js.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(imin > 0 && imin < js.len() - 1);
    assert!(js[..=imin].windows(2).all(|w| w[1] < w[0]));
    assert!(js[imin..].windows(2).all(|w| w[1] > w[0]));
}
