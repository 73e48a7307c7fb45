mod common;

use common::model;
use conormal_trace::branchflow::{BranchChoice, PhasePoint};
use conormal_trace::orbits::{continue_cylinder, find_closed_orbit, length_spectrum, ClosedOrbit, OrbitOptions};
use conormal_trace::potential::PotentialModel;
use std::f64::consts::PI;

fn spectrum_orbit(m: &PotentialModel, l_max: f64, n_max: usize, pick: impl Fn(&ClosedOrbit) -> bool) -> ClosedOrbit {
    length_spectrum(m, &[1.0], l_max, n_max, &OrbitOptions::default())
        .unwrap()
        .entries
        .into_iter()
        .map(|e| e.orbit)
        .find(|o| pick(o))
        .expect("orbit in spectrum")
}

fn iterate_check(m: &PotentialModel, primitive: &ClosedOrbit, times: usize) {
    let opts = OrbitOptions::default();
    let word: Vec<BranchChoice> = (0..times).flat_map(|_| primitive.itinerary.iter().cloned()).collect();
    let it = find_closed_orbit(m, primitive.energy, &word, &primitive.base, times as f64 * primitive.period, &opts).unwrap();
    assert!((it.period - times as f64 * primitive.period).abs() < 1e-6);
    assert_eq!(it.repetition, times);
    assert!((it.primitive_period - primitive.period).abs() < 1e-6);
    let mut power = primitive.monodromy.clone();
    for _ in 1..times {
        power = &power * &primitive.monodromy;
    }
    let err = (&it.monodromy - &power).amax() / power.amax().max(1.0);
    assert!(err < 1e-6, "{}: iterate monodromy off by {err:e}", m.name);
}

#[test]
fn iterates_are_refound_with_powers_of_the_monodromy() {
    let tub = model("bathtub1d");
    let bounce = spectrum_orbit(&tub, 2.5, 2, |o| (o.period - 2.0).abs() < 1e-6);
    iterate_check(&tub, &bounce, 2);
    iterate_check(&tub, &bounce, 3);
    let ell = model("elliptic-bathtub-2d");
    let minor = spectrum_orbit(&ell, 4.5, 2, |o| (o.period - 2.0).abs() < 1e-6 && o.reflections == 2);
    iterate_check(&ell, &minor, 2);
    let zero = spectrum_orbit(&tub, 5.5, 2, |o| o.reflections == 0);
    iterate_check(&tub, &zero, 2);
}

#[test]
fn period_does_not_depend_on_the_section() {
    let opts = OrbitOptions::default();
    for (name, l_max) in [("bathtub1d", 5.5), ("elliptic-bathtub-2d", 5.5)] {
        let m = model(name);
        let spec = length_spectrum(&m, &[1.0], l_max, 2, &opts).unwrap();
        for e in spec.entries.iter().filter(|e| e.orbit.admissible()) {
            for frac in (0..20).map(|k| 0.013 + k as f64 / 20.0) {
                let moved = e.orbit.shifted(&m, frac * e.period, &opts).unwrap();
                assert!((moved.period - e.period).abs() < 1e-9, "{name} T = {}", e.period);
                assert!((moved.action - e.orbit.action).abs() < 1e-8);
                assert_eq!(moved.morse_index, e.orbit.morse_index, "{name} T = {} shifted by {frac}", e.period);
            }
        }
    }
}

/// Outermost turning point of an even 1D potential.
fn turning_point(m: &PotentialModel, e: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while m.eval_potential(&[hi]) < e {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if m.eval_potential(&[mid]) < e {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `T(E) = 2 ∫_0^{x_t} dx / sqrt(E - V)` for an even potential, with
/// `x = x_t - w^2` removing the turning-point singularity and composite
/// Simpson on both sides of the kink.
fn period_by_quadrature(m: &PotentialModel, e: f64) -> f64 {
    let xt = turning_point(m, e);
    let integrand = |w: f64| {
        let x = xt - w * w;
        let gap = e - m.eval_potential(&[x]);
        if w == 0.0 {
            // limit 2 / sqrt(V'(x_t))
            let d = 1e-7;
            let slope = (m.eval_potential(&[xt]) - m.eval_potential(&[xt - d])) / d;
            2.0 / slope.sqrt()
        } else {
            2.0 * w / gap.sqrt()
        }
    };
    let simpson = |a: f64, b: f64, n: usize| {
        let h = (b - a) / n as f64;
        let mut s = integrand(a) + integrand(b);
        for i in 1..n {
            s += integrand(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let w_kink = (xt - 1.0).sqrt();
    2.0 * (simpson(0.0, w_kink, 4000) + simpson(w_kink, xt.sqrt(), 4000))
}

#[test]
fn wall_penetrating_period_matches_quadrature() {
    let opts = OrbitOptions::default();
    for name in ["bathtub1d", "bathtub1d-confined"] {
        let m = model(name);
        let seed = spectrum_orbit(&m, 5.5, 2, |o| o.reflections == 0);
        let cyl = continue_cylinder(&m, &seed, (0.9, 1.1), 5, &opts).unwrap();
        for o in &cyl.orbits {
            let q = period_by_quadrature(&m, o.energy);
            assert!((o.period - q).abs() < 1e-7 * q, "{name} E = {}: {} vs {q}", o.energy, o.period);
        }
    }
    // closed form for the bare bathtub
    let m = model("bathtub1d");
    let seed = spectrum_orbit(&m, 5.5, 2, |o| o.reflections == 0);
    assert!((seed.period - (2.0 + PI)).abs() < 1e-9);
}

#[test]
fn length_spectrum_examples() {
    let opts = OrbitOptions::default();
    let ho = length_spectrum(&model("harmonic"), &[1.0], 20.0, 0, &opts).unwrap();
    let mut periods = ho.periods();
    periods.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    assert_eq!(periods.len(), 3);
    for (t, k) in periods.iter().zip(1..) {
        assert!((t - 2.0 * PI * k as f64).abs() < 1e-8);
    }
    let tub = length_spectrum(&model("bathtub1d"), &[1.0], 5.5, 2, &opts).unwrap();
    let has = |t: f64, n: usize| tub.entries.iter().any(|e| (e.period - t).abs() < 1e-8 && e.reflections == n);
    assert!(has(2.0, 2));
    assert!(has(2.0 + PI, 0));
    assert!(has(PI / 2.0, 1));
    assert!(length_spectrum(&model("free"), &[1.0], 20.0, 4, &opts).unwrap().entries.is_empty());
}

#[test]
fn cylinders_follow_the_classical_period_laws() {
    let opts = OrbitOptions::default();
    let tub = model("bathtub1d");
    let bounce = spectrum_orbit(&tub, 2.5, 2, |o| (o.period - 2.0).abs() < 1e-6);
    let cyl = continue_cylinder(&tub, &bounce, (0.9, 1.1), 7, &opts).unwrap();
    for w in cyl.orbits.windows(2) {
        assert!(w[1].period < w[0].period);
    }
    for o in &cyl.orbits {
        assert!((o.period - 2.0 / o.energy.sqrt()).abs() < 1e-9);
        assert!((o.action - 2.0 * o.energy.sqrt()).abs() < 1e-8);
    }
    let ho = model("harmonic");
    let seed = find_closed_orbit(&ho, 1.0, &[], &PhasePoint::new(vec![0.0], vec![1.0]), 6.3, &opts).unwrap();
    let cyl = continue_cylinder(&ho, &seed, (0.8, 1.2), 5, &opts).unwrap();
    for o in &cyl.orbits {
        assert!((o.period - 2.0 * PI).abs() < 1e-9);
    }
}

#[test]
fn closed_orbit_invariants_hold_on_the_fleet() {
    let opts = OrbitOptions::default();
    for (name, l_max) in [("bathtub1d", 5.5), ("bathtub1d-confined", 5.5), ("elliptic-bathtub-2d", 5.5), ("kink1d", 4.0)] {
        let m = model(name);
        for e in length_spectrum(&m, &[1.0], l_max, 2, &opts).unwrap().entries {
            let o = &e.orbit;
            assert!(o.closure_residual < 1e-9, "{name}");
            assert!(o.symplectic_defect < 1e-6, "{name}");
            let m_int = (o.period / o.primitive_period).round();
            assert!((o.period - m_int * o.primitive_period).abs() < 1e-9);
            if !o.degenerate {
                assert_eq!(o.unit_multiplicity, 2, "{name}");
            }
        }
    }
}
