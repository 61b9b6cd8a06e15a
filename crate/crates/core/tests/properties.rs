mod common;

use common::{random_case, observer_controller};
use mocc_core::analysis::{decompose_lemma1, theorem1_decomposition};
use mocc_core::es::{tune_with, EsConfig};
use mocc_core::linalg::max_singular_value;
use mocc_core::lti::FrequencyGrid;
use mocc_core::signal::{power_norm_signal, Channel, SignalSpec, Tone};
use mocc_core::youla::{assemble_composite, verify_transfer_equality, NominalBlock, Tracking};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn tone() -> impl Strategy<Value = Tone> {
    (-3.0..3.0f64, 0.05..50.0f64, -3.2..3.2f64).prop_map(|(a, w, p)| Tone { amplitude: a, omega: w, phase: p })
}

fn distinct(tones: Vec<Tone>) -> Vec<Tone> {
    let mut out: Vec<Tone> = Vec::new();
    for t in tones {
        if out.iter().all(|o| (o.omega - t.omega).abs() > 1e-6) {
            out.push(t);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn power_is_sum_of_line_powers(offset in -2.0..2.0f64, tones in prop::collection::vec(tone(), 0..6)) {
        let tones = distinct(tones);
        let expect = offset * offset + tones.iter().map(|t| t.amplitude * t.amplitude / 2.0).sum::<f64>();
        let s = SignalSpec::scalar(offset, tones).unwrap();
        let p = power_norm_signal(&s).unwrap().powi(2);
        prop_assert!((p - expect).abs() <= 1e-12 * (1.0 + expect));
    }

    #[test]
    fn composite_equals_k_for_any_plant(seed in any::<u64>()) {
        let case = random_case(seed);
        let grid = FrequencyGrid::logspace(-2.0, 3.0, 20).unwrap();
        for nominal in [
            NominalBlock::General(case.c.clone()),
            NominalBlock::Shared { f: case.f.clone() },
            NominalBlock::Static { dc: case.dc.clone() },
        ] {
            let comp = assemble_composite(&case.plant, nominal, &case.k, &case.l, 1.0, Tracking::None).unwrap();
            let check = verify_transfer_equality(&comp, &case.k, &grid).unwrap();
            prop_assert!(check.passes(1e-8), "{:?}", check);
        }
    }

    #[test]
    fn q_output_scales_with_alpha(seed in any::<u64>(), alpha in -10.0..10.0f64) {
        let case = random_case(seed);
        let comp = assemble_composite(&case.plant, NominalBlock::Shared { f: case.f.clone() }, &case.k, &case.l, 1.0, Tracking::None).unwrap();
        let q1 = comp.q.system().unwrap().response(1.3).unwrap();
        let qa = comp.with_alpha(alpha).q.system().unwrap().response(1.3).unwrap();
        prop_assert!(max_singular_value(&(qa - q1 * nalgebra::Complex::new(alpha, 0.0))) <= 1e-9 * (1.0 + alpha.abs()));
    }

    #[test]
    fn power_split_is_additive(seed in 0u64..1000, w_tones in prop::collection::vec(tone(), 1..4), r_tones in prop::collection::vec(tone(), 1..4)) {
        let case = random_case(seed);
        let p = &case.plant;
        let c = observer_controller(p, &case.f, &case.l, &DMatrix::zeros(p.m2(), p.p2()));
        let dec = decompose_lemma1(p, &c, &case.k).unwrap();
        let r_tones = distinct(r_tones);
        let w_tones: Vec<Tone> = distinct(w_tones).into_iter().filter(|t| r_tones.iter().all(|r| (r.omega - t.omega).abs() > 1e-6)).collect();
        let w = SignalSpec::new(vec![Channel::new(0.0, w_tones); p.m1()]).unwrap();
        let r = SignalSpec::new(vec![Channel::new(0.5, r_tones); p.p2()]).unwrap();
        let rep = theorem1_decomposition(&dec, &w, &r).unwrap();
        prop_assert!((rep.z_sq - rep.z1_sq - rep.z2_sq).abs() <= 1e-10 * (1.0 + rep.z_sq));
    }

    #[test]
    fn es_ignores_constant_costs(j in -5.0..5.0f64, g in 0.0..100.0f64) {
        let cfg = EsConfig { g, ..EsConfig::default() };
        let tr = tune_with(&cfg, 30, |_| Ok(j)).unwrap();
        prop_assert!(tr.records.iter().all(|r| r.alpha_hat == cfg.alpha0));
    }

    #[test]
    fn es_probe_stays_within_amplitude_when_frozen(a in 0.01..1.0f64, w in 0.1..3.0f64) {
        let cfg = EsConfig { a, omega_p: w, g: 0.0, ..EsConfig::default() };
        let tr = tune_with(&cfg, 30, |x| Ok(x * x)).unwrap();
        prop_assert!(tr.records.iter().all(|r| (r.alpha_probe - cfg.alpha0).abs() <= a * (1.0 + 1e-12)));
    }
}
