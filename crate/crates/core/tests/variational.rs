mod common;

use common::{loop_index, model};
use conormal_trace::branchflow::{flow_with_itinerary, BranchChoice, FlowConfig, PhasePoint};
use conormal_trace::orbits::{length_spectrum, ClosedOrbit, OrbitOptions};
use conormal_trace::potential::PotentialModel;
use conormal_trace::variational::{
    action_hessian_blocks, integrate_monodromy, rotate_to_frame, two_point_action, van_vleck_split,
};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

fn fleet_orbits(name: &str, l_max: f64, n_max: usize) -> (PotentialModel, Vec<ClosedOrbit>) {
    let m = model(name);
    let spec = length_spectrum(&m, &[1.0], l_max, n_max, &OrbitOptions::default()).unwrap();
    let orbits = spec.entries.into_iter().map(|e| e.orbit).filter(|o| o.admissible()).collect();
    (m, orbits)
}

/// `(∂_t S, ∂_x S, ∂_y S) = (-E, Ξ(t), -η)` of the two-point problem along
/// the orbit's branch word.
fn action_gradient(m: &PotentialModel, o: &ClosedOrbit, t: f64, x: &[f64], y: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let cfg = FlowConfig { strict: true, ..FlowConfig::default() };
    let (_, eta, tr) = two_point_action(m, y, x, t, &o.itinerary, &o.base.xi, &cfg).unwrap();
    let e = PhasePoint::new(y.to_vec(), eta.clone()).energy(m);
    (-e, tr.final_point.xi.clone(), eta.iter().map(|v| -v).collect())
}

#[test]
fn time_derivatives_of_the_action() {
    let d = 1e-5;
    for (name, l_max) in [("bathtub1d", 2.5), ("elliptic-bathtub-2d", 5.2)] {
        let (m, orbits) = fleet_orbits(name, l_max, 2);
        assert!(!orbits.is_empty());
        // self-conjugate orbits (the wall loops) have no C
        for o in orbits.iter().filter(|o| o.hessian_index.is_some()) {
            let n = m.dimension;
            let x0 = o.base.x.clone();
            let v = DVector::from_vec(o.velocity());
            let hb = action_hessian_blocks(&o.monodromy).unwrap();
            let c = &hb.c;
            // ∂tt S = -Ẋᵀ C Ẋ
            let dt_plus = action_gradient(&m, o, o.period + d, &x0, &x0).0;
            let dt_minus = action_gradient(&m, o, o.period - d, &x0, &x0).0;
            let s_tt = (dt_plus - dt_minus) / (2.0 * d);
            let expect = -(v.transpose() * c * &v)[(0, 0)];
            assert!((s_tt - expect).abs() < 1e-6 * expect.abs().max(1.0), "{name} T={}: {s_tt} vs {expect}", o.period);
            // ∂tx S = Ẋᵀ C
            let row = v.transpose() * c;
            for j in 0..n {
                let mut xp = x0.clone();
                let mut xm = x0.clone();
                xp[j] += d;
                xm[j] -= d;
                let s_tx = (action_gradient(&m, o, o.period, &xp, &x0).0 - action_gradient(&m, o, o.period, &xm, &x0).0) / (2.0 * d);
                assert!((s_tx - row[j]).abs() < 1e-6 * row.amax().max(1.0), "{name}: s_tx {s_tx} vs {}", row[j]);
            }
            // ∂xt S + ∂yt S = Bᵀ Ẋ
            let (_, xi_p, my_p) = action_gradient(&m, o, o.period + d, &x0, &x0);
            let (_, xi_m, my_m) = action_gradient(&m, o, o.period - d, &x0, &x0);
            let bt_v = hb.b.transpose() * &v;
            for j in 0..n {
                let fd = ((xi_p[j] + my_p[j]) - (xi_m[j] + my_m[j])) / (2.0 * d);
                assert!((fd - bt_v[j]).abs() < 1e-6 * bt_v.amax().max(1.0), "{name}: {fd} vs {}", bt_v[j]);
            }
        }
    }
}

#[test]
fn fermi_alignment_kills_the_first_column_of_a() {
    for (name, l_max) in [("bathtub1d", 5.5), ("elliptic-bathtub-2d", 5.5), ("bathtub1d-confined", 5.5)] {
        let (_, orbits) = fleet_orbits(name, l_max, 2);
        for o in &orbits {
            let rot = rotate_to_frame(&o.monodromy, &o.velocity());
            let Ok(hb) = action_hessian_blocks(&rot) else { continue };
            let n = hb.a.nrows();
            let scale = hb.a.amax().max(hb.b.amax()).max(1.0);
            for j in 0..n {
                assert!(hb.a[(j, 0)].abs() < 1e-6 * scale, "{name} T={}: A e1 = {}", o.period, hb.a[(j, 0)]);
                assert!(hb.a[(0, j)].abs() < 1e-6 * scale);
                assert!((hb.b[(0, j)] + hb.b[(j, 0)]).abs() < 1e-6 * scale);
            }
            assert!(hb.b[(0, 0)].abs() < 1e-6 * scale);
            assert!((&hb.a - hb.a.transpose()).amax() < 1e-7 * scale);
        }
    }
}

#[test]
fn bounce_c_matches_a_five_point_stencil() {
    let m = model("bathtub1d");
    let cfg = FlowConfig { strict: true, ..FlowConfig::default() };
    let word = [BranchChoice::Reflect, BranchChoice::Reflect];
    let s = |x: f64, y: f64| two_point_action(&m, &[y], &[x], 2.0, &word, &[1.0], &cfg).unwrap().0;
    let h = 0.05;
    let w = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
    let mut mixed = 0.0;
    for (i, wi) in w.iter().enumerate() {
        for (j, wj) in w.iter().enumerate() {
            if *wi != 0.0 && *wj != 0.0 {
                mixed += wi * wj * s((i as f64 - 2.0) * h, (j as f64 - 2.0) * h);
            }
        }
    }
    mixed /= h * h;
    let tr = flow_with_itinerary(&m, &PhasePoint::new(vec![0.0], vec![1.0]), &word, 2.0, &cfg).unwrap();
    let mono = integrate_monodromy(&m, &tr, &cfg).unwrap();
    let c = action_hessian_blocks(&mono.matrix).unwrap().c[(0, 0)];
    // S = (4 + x - y)^2 / 8 for bounces off both walls
    assert!((c + 0.25).abs() < 1e-9);
    assert!((mixed - c).abs() < 1e-5, "{mixed} vs {c}");
}

#[test]
fn van_vleck_composition_examples() {
    let cfg = FlowConfig::default();
    let ho = model("harmonic");
    let t1 = PI / 3.0;
    let tr = flow_with_itinerary(&ho, &PhasePoint::new(vec![0.3], vec![0.8]), &[], t1 + PI / 4.0, &cfg).unwrap();
    assert!(van_vleck_split(&ho, &tr, t1, &cfg).unwrap() < 1e-8);
    let tub = model("bathtub1d");
    let tr = flow_with_itinerary(&tub, &PhasePoint::new(vec![0.2], vec![0.9]), &[BranchChoice::Reflect], 1.3, &cfg).unwrap();
    let at = tr.events[0].t();
    for cut in [at, at - 1e-6, at + 1e-6, 0.4 * at, at + 0.5] {
        let r = van_vleck_split(&tub, &tr, cut, &cfg).unwrap();
        assert!(r < 1e-7, "cut {cut}: {r:e}");
    }
}

#[test]
fn monodromy_is_symplectic_across_jumps() {
    let cfg = FlowConfig::default();
    let m = model("elliptic-bathtub-2d");
    let tr = flow_with_itinerary(
        &m,
        &PhasePoint::new(vec![0.1, 0.2], vec![0.7, -0.5]),
        &[BranchChoice::Reflect, BranchChoice::Transmit, BranchChoice::Reflect, BranchChoice::Reflect],
        4.0,
        &cfg,
    )
    .unwrap();
    let mono = integrate_monodromy(&m, &tr, &cfg).unwrap();
    assert!(mono.jumps.len() >= 3);
    let omega = DMatrix::from_row_slice(4, 4, &[0., 0., 1., 0., 0., 0., 0., 1., -1., 0., 0., 0., 0., -1., 0., 0.]);
    for t in [0.3, 1.1, 2.5, 4.0] {
        let a = mono.at(t);
        assert!((a.transpose() * &omega * &a - &omega).amax() < 1e-6);
    }
}

#[test]
fn morse_index_matches_the_discrete_second_variation() {
    let mut seen = 0;
    for (name, l_max, n_max) in [("bathtub1d", 4.5, 4), ("elliptic-bathtub-2d", 4.0, 2)] {
        let (m, orbits) = fleet_orbits(name, l_max, n_max);
        for o in &orbits {
            let li = loop_index(&m, o, 200);
            assert!(li.residual < 1e-9);
            assert_eq!(Some(li.index), o.morse_index, "{name} T = {}", o.period);
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
