mod common;

use common::bench::{controllers, disturbances, reference};
use mocc_core::sim::{simulate, SimOptions};

/// Rows w = 0, w1, w2, w3; columns MOCC, H∞ tracking, LQT, DOBC.
const TABLE: [[f64; 4]; 4] = [
    [0.0408, 0.1127, 0.0408, 0.0408],
    [0.1245, 0.1970, 0.2629, 0.1319],
    [0.3771, 0.4499, 0.6698, 0.4744],
    [0.6296, 0.6946, 1.2425, 0.8159],
];

#[test]
fn benchmark_costs() {
    let (plant, ctrls) = controllers();
    let opts = SimOptions::default().costs_only();
    for (j, c) in ctrls.iter().enumerate() {
        let tol = if j == 1 { 0.15 } else { 0.05 };
        for (i, w) in disturbances().iter().enumerate() {
            let cost = simulate(&plant, c, &reference(), w, &opts).unwrap().cost_z;
            let rel = (cost - TABLE[i][j]).abs() / TABLE[i][j];
            assert!(rel <= tol, "{} row {i}: {cost} vs {}", c.name, TABLE[i][j]);
        }
    }
}

#[test]
fn simulation_is_deterministic() {
    let (plant, ctrls) = controllers();
    let opts = SimOptions::new(1e-3, 10.0).stride(7);
    let w = &disturbances()[3];
    let a = simulate(&plant, &ctrls[0], &reference(), w, &opts).unwrap();
    let b = simulate(&plant, &ctrls[0], &reference(), w, &opts).unwrap();
    assert_eq!(a, b);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with("t,r,w,y,u,u_c,u_q,f,z1,z2,z_m1,z_m2"));
    assert_eq!(text.lines().count(), 1 + a.t.len());
}

/// The cost quadrature is second order in `h`.
#[test]
fn halving_the_step_changes_cost_little() {
    let (plant, ctrls) = controllers();
    let w = &disturbances()[1];
    let coarse = simulate(&plant, &ctrls[0], &reference(), w, &SimOptions::new(2e-3, 20.0).costs_only()).unwrap();
    let fine = simulate(&plant, &ctrls[0], &reference(), w, &SimOptions::new(1e-3, 20.0).costs_only()).unwrap();
    let rel = (coarse.cost_z - fine.cost_z).abs() / fine.cost_z;
    assert!(rel <= 1e-4, "relative change {rel:e}");
}

#[test]
fn too_large_step_diverges_with_error() {
    let (plant, ctrls) = controllers();
    let res = simulate(&plant, &ctrls[0], &reference(), &disturbances()[1], &SimOptions::new(5e-2, 100.0).costs_only());
    assert!(matches!(res, Err(mocc_core::Error::Diverged { .. })));
}

#[test]
fn measured_cost_tracks_true_cost_without_noise() {
    let (plant, ctrls) = controllers();
    let tr = simulate(&plant, &ctrls[2], &reference(), &disturbances()[0], &SimOptions::new(1e-3, 20.0).costs_only()).unwrap();
    assert!((tr.cost_z - tr.cost_zm).abs() <= 1e-12);
}
