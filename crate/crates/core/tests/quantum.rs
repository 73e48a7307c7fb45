mod common;

use common::model;
use conormal_trace::orbits::{length_spectrum, OrbitOptions};
use conormal_trace::potential::{piecewise_polynomial_1d, PotentialModel};
use conormal_trace::quantum::{eigensolve_1d, g_rho_quantum, scattering_reflection_1d, Domain};
use conormal_trace::semiclassics::{Cutoff, SpectralWindow};
use num_complex::Complex64;
use std::f64::consts::PI;

#[test]
fn harmonic_levels() {
    let m = model("harmonic");
    let h = 0.05;
    let s = eigensolve_1d(&m, h, None, 0, (0.5, 1.5)).unwrap();
    assert_eq!(s.eigenvalues.len(), 20);
    for (j, e) in s.eigenvalues.iter().enumerate() {
        let n = s.first_index + j;
        assert!((e - h * (n as f64 + 0.5)).abs() < 1e-8, "level {n}: {e}");
    }
}

#[test]
fn box_levels() {
    let m = model("free");
    let h = 0.1;
    let s = eigensolve_1d(&m, h, Some(Domain { left: 0.0, right: PI }), 0, (0.05, 2.0)).unwrap();
    for (j, e) in s.eigenvalues.iter().enumerate() {
        let n = (s.first_index + j + 1) as f64;
        assert!((e - h * h * n * n).abs() < 1e-9, "{e} vs {}", h * h * n * n);
    }
    assert_eq!(s.eigenvalues.len(), 12);
}

#[test]
fn moving_the_wall_out_leaves_the_levels_alone() {
    let m = model("bathtub1d");
    let h = 0.05;
    let a = eigensolve_1d(&m, h, None, 0, (0.8, 1.2)).unwrap();
    let wide = Domain { left: 1.1 * a.domain.left, right: 1.1 * a.domain.right };
    let b = eigensolve_1d(&m, h, Some(wide), 0, (0.8, 1.2)).unwrap();
    assert_eq!(a.eigenvalues.len(), b.eigenvalues.len());
    assert_eq!(a.first_index, b.first_index);
    for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert!((x - y).abs() < 1e-8, "{x} vs {y}");
    }
}

#[test]
fn level_spacing_follows_the_period() {
    let m = model("bathtub1d-confined");
    let h = 0.02;
    let spec = length_spectrum(&m, &[1.0], 6.0, 0, &OrbitOptions::default()).unwrap();
    let t = spec.entries.iter().find(|e| e.reflections == 0).unwrap().period;
    let s = eigensolve_1d(&m, h, None, 0, (0.9, 1.1)).unwrap();
    let near = s.eigenvalues.windows(2).min_by(|a, b| ((a[0] - 1.0).abs()).total_cmp(&(b[0] - 1.0).abs())).unwrap();
    let expect = 2.0 * PI * h / t;
    assert!(((near[1] - near[0]) - expect).abs() < 0.1 * expect, "{} vs {expect}", near[1] - near[0]);
}

#[test]
fn both_sides_of_the_trace_agree() {
    let h = 0.02;
    for name in ["harmonic", "bathtub1d", "bathtub1d-confined"] {
        let m = model(name);
        let w = SpectralWindow::new(Cutoff::gaussian(1.0, 0.1), Cutoff::gaussian(3.0, 0.4));
        let lw = w.level_window(&[0.95, 1.0, 1.05], h, 1e-14);
        let s = eigensolve_1d(&m, h, None, 0, lw).unwrap();
        let q = g_rho_quantum(&s, &w, &[0.95, 1.0, 1.05]).unwrap();
        assert!(q.mismatch < 1e-6, "{name}: {:e}", q.mismatch);
    }
}

/// Outgoing wave launched far out with first-order WKB data where the
/// potential is deep, integrated back by fixed-step RK4 and split at 0.
fn reflection_by_shooting(m: &PotentialModel, e: f64, h: f64, x0: f64, steps: usize) -> Complex64 {
    let v = |x: f64| m.eval_potential(&[x]);
    let dv = |x: f64| (v(x + 1e-5) - v(x - 1e-5)) / 2e-5;
    let k = |x: f64| (e - v(x)).sqrt();
    let dlog = Complex64::new(dv(x0) / (4.0 * k(x0) * k(x0)), k(x0) / h);
    let f = |x: f64, y: [Complex64; 2]| [y[1], y[0] * (v(x) - e) / (h * h)];
    let mut y = [Complex64::new(1.0, 0.0), dlog];
    let dx = -x0 / steps as f64;
    let mut x = x0;
    for _ in 0..steps {
        let add = |a: [Complex64; 2], b: [Complex64; 2], s: f64| [a[0] + b[0] * s, a[1] + b[1] * s];
        let k1 = f(x, y);
        let k2 = f(x + 0.5 * dx, add(y, k1, 0.5 * dx));
        let k3 = f(x + 0.5 * dx, add(y, k2, 0.5 * dx));
        let k4 = f(x + dx, add(y, k3, dx));
        for i in 0..2 {
            y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dx / 6.0);
        }
        x += dx;
    }
    let ik = Complex64::new(0.0, e.sqrt() / h);
    (y[0] - y[1] / ik) / (y[0] + y[1] / ik)
}

#[test]
fn reflection_matches_shooting_from_far_out() {
    // x^2 - x^3/3 peaks at 4/3, well below E = 4, then falls away; the
    // smooth barrier adds only exp(-c/h) on top of the interface term
    let m = piecewise_polynomial_1d(0.0, vec![0.0], vec![0.0, 0.0, 1.0, -1.0 / 3.0], 2).unwrap();
    for h in [0.1, 0.05] {
        let s = scattering_reflection_1d(&m, 4.0, h).unwrap();
        let shot = reflection_by_shooting(&m, 4.0, h, 25.0, 1_000_000);
        assert!((s.r - shot).norm() < 1e-4 * shot.norm(), "h={h}: {} vs {shot}", s.r);
        assert!((s.reflection + s.transmission - 1.0).abs() < 1e-6);
    }
}

#[test]
fn kink_scattering_is_unitary() {
    let m = model("kink1d");
    for h in [0.2, 0.1, 0.05] {
        let s = scattering_reflection_1d(&m, 1.0, h).unwrap();
        assert!((s.reflection + s.transmission - 1.0).abs() < 1e-6, "h={h}");
    }
}
