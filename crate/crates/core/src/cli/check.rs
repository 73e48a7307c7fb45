use super::commands::Context;
use super::config::RunConfig;
use crate::branchflow::{branch_flowout, flow_with_itinerary, BranchChoice, FlowConfig, PhasePoint};
use crate::error::{Error, Result};
use crate::orbits::{continue_cylinder, length_spectrum, OrbitOptions};
use crate::potential::{builtin, builtin_models, ModelParams, PotentialModel};
use crate::quantum::{eigensolve_1d, g_rho_quantum, scattering_reflection_1d};
use crate::semiclassics::{g_rho_predicted, reflection_coefficient_from, Cutoff, SpectralWindow};
use crate::variational::van_vleck_split;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Largest violation measured, in the units of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

struct Tally {
    worst: f64,
    samples: usize,
    detail: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Tally { worst: 0.0, samples: 0, detail: None }
    }

    fn add(&mut self, v: f64) {
        self.samples += 1;
        // NaN counts as a failure
        if v.is_nan() || v > self.worst {
            self.worst = if v.is_nan() { f64::INFINITY } else { v };
        }
    }
}

fn finish(name: &str, tolerance: f64, r: Result<Tally>) -> CheckResult {
    match r {
        Ok(t) => CheckResult {
            name: name.into(),
            passed: t.samples > 0 && t.worst <= tolerance,
            worst: t.worst,
            tolerance,
            samples: t.samples,
            detail: t.detail,
        },
        Err(e) => CheckResult {
            name: name.into(),
            passed: false,
            worst: f64::INFINITY,
            tolerance,
            samples: 0,
            detail: Some(e.to_string()),
        },
    }
}

fn model(name: &str) -> PotentialModel {
    let mut p = ModelParams::default();
    if name.ends_with("2d") {
        p.dimension = 2;
    }
    builtin(name, &p).expect("built-in models validate")
}

/// `J(y, -v) = (-1)^{k0+1} J(y, v)` at sample points of every interface.
fn jump_orientation() -> Result<Tally> {
    let mut t = Tally::new();
    for m in builtin_models() {
        let sign = if m.k0 % 2 == 0 { -1.0 } else { 1.0 };
        for (i, iface) in m.interfaces.iter().enumerate() {
            for y in iface.sample_points(m.dimension, 8) {
                let n = iface.unit_normal(&y);
                let back: Vec<f64> = n.iter().map(|a| -a).collect();
                let (a, b) = (m.jump_on(i, &y, &n)?, m.jump_on(i, &y, &back)?);
                t.add((b - sign * a).abs() / a.abs().max(1.0));
            }
        }
    }
    Ok(t)
}

/// Energy drift over every leaf of the branching flowout.
fn energy_conservation(rng: &mut ChaCha8Rng, samples: usize) -> Result<Tally> {
    let mut t = Tally::new();
    let cfg = FlowConfig::default();
    for name in ["bathtub1d", "harmonic", "elliptic-bathtub-2d"] {
        let m = model(name);
        for _ in 0..samples.clamp(1, 10) {
            let e: f64 = rng.random_range(0.5..1.5);
            let p0 = if m.dimension == 1 {
                let x: f64 = rng.random_range(-0.5..0.5);
                let xi = (e - m.eval_potential(&[x])).sqrt();
                PhasePoint::new(vec![x], vec![if rng.random_bool(0.5) { xi } else { -xi }])
            } else {
                let th: f64 = rng.random_range(0.0..2.0 * PI);
                let x = vec![rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)];
                let s = (e - m.eval_potential(&x)).sqrt();
                PhasePoint::new(x, vec![s * th.cos(), s * th.sin()])
            };
            let e0 = p0.energy(&m);
            for (leaf, _) in branch_flowout(&m, &p0, 3.0, 2, &cfg)? {
                t.add((leaf.energy(&m) - e0).abs() / e0.abs().max(1.0));
            }
        }
    }
    Ok(t)
}

/// Symplecticity, closure and agreement of the two Poincaré routes on the
/// closed orbits of the fleet.
fn orbit_invariants() -> Result<Tally> {
    let mut t = Tally::new();
    let opts = OrbitOptions::default();
    for (name, l_max, n_max) in [("bathtub1d", 2.5, 2), ("harmonic", 6.5, 0), ("elliptic-bathtub-2d", 5.5, 2)] {
        let m = model(name);
        let spec = length_spectrum(&m, &[1.0], l_max, n_max, &opts)?;
        for entry in spec.entries.iter().filter(|e| e.orbit.admissible()) {
            let o = &entry.orbit;
            t.add(o.symplectic_defect);
            t.add(o.closure_residual);
            if let (a, Some(b)) = o.poincare_routes {
                t.add((a - b).abs() / a.abs().max(1.0));
            }
        }
    }
    Ok(t)
}

fn bounce_cylinder() -> Result<crate::orbits::OrbitCylinder> {
    let m = model("bathtub1d");
    let opts = OrbitOptions::default();
    let spec = length_spectrum(&m, &[1.0], 2.5, 2, &opts)?;
    let seed = spec
        .entries
        .iter()
        .find(|e| (e.period - 2.0).abs() < 1e-6)
        .ok_or_else(|| Error::InvalidModel("bounce orbit not found".into()))?;
    continue_cylinder(&m, &seed.orbit, (0.9, 1.1), 9, &opts)
}

/// `d(S + E T)/dE = T` along the bounce cylinder.
fn hamilton_jacobi() -> Result<Tally> {
    let mut t = Tally::new();
    t.add(bounce_cylinder()?.hamilton_jacobi_defect());
    Ok(t)
}

/// Van Vleck composition at random cut times of random bounce trajectories.
/// Cuts at conjugate endpoints are skipped.
fn van_vleck(rng: &mut ChaCha8Rng, samples: usize) -> Result<Tally> {
    let mut t = Tally::new();
    let m = model("bathtub1d");
    let cfg = FlowConfig::default();
    let mut skipped = 0;
    for _ in 0..samples {
        let e: f64 = rng.random_range(0.5..1.5);
        let x: f64 = rng.random_range(-0.9..0.9);
        let total: f64 = rng.random_range(1.0..4.0);
        let p0 = PhasePoint::new(vec![x], vec![e.sqrt()]);
        let word = vec![BranchChoice::Reflect; 8];
        let tr = match flow_with_itinerary(&m, &p0, &word, total, &FlowConfig { strict: false, ..cfg }) {
            Ok(tr) => tr,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let mut t1: f64 = rng.random_range(0.1..total - 0.1);
        while tr.events.iter().any(|ev| (ev.t() - t1).abs() < 1e-3) {
            t1 += 2e-3;
        }
        match van_vleck_split(&m, &tr, t1, &cfg) {
            Ok(r) => t.add(r),
            Err(Error::ConjugateEndpoint { .. } | Error::DegenerateStationaryPoint) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    t.detail = Some(format!("{skipped} samples skipped at conjugate endpoints"));
    Ok(t)
}

/// `|r|^2 h^4` from the jump against the scattering oracle on `kink1d`.
fn reflection_law(factor: f64) -> Result<Tally> {
    let mut t = Tally::new();
    let m = model("kink1d");
    let (e, h): (f64, f64) = (1.0, 0.025);
    let jump = factor * m.jump(&[0.0], &[1.0])?;
    let r = reflection_coefficient_from(m.k0, jump, e.sqrt());
    let oracle = scattering_reflection_1d(&m, e, h)?;
    let classical = r.norm_sqr() * h.powi(2 * m.k0 as i32);
    t.add((classical / oracle.reflection - 1.0).abs());
    t.detail = Some(format!("classical {classical:.6e}, oracle {:.6e}", oracle.reflection));
    Ok(t)
}

fn scattering_unitarity() -> Result<Tally> {
    let mut t = Tally::new();
    let m = model("kink1d");
    for (e, h) in [(1.0, 0.1), (1.0, 0.05), (0.5, 0.05), (2.0, 0.1)] {
        let s = scattering_reflection_1d(&m, e, h)?;
        t.add((s.reflection + s.transmission - 1.0).abs());
    }
    Ok(t)
}

/// Spectral sum against the Fourier side on the harmonic oscillator.
fn convention() -> Result<Tally> {
    let mut t = Tally::new();
    let m = model("harmonic");
    let win = SpectralWindow::new(Cutoff::gaussian(1.0, 0.3), Cutoff::gaussian(2.0 * PI, 0.25));
    let h = 0.1;
    let spec = eigensolve_1d(&m, h, None, 0, win.level_window(&[1.0], h, 1e-14))?;
    t.add(g_rho_quantum(&spec, &win, &[0.9, 1.0, 1.1])?.mismatch);
    Ok(t)
}

/// The mirrored time window gives the conjugate prediction.
fn time_reversal() -> Result<Tally> {
    let mut t = Tally::new();
    let cyl = bounce_cylinder()?;
    let w = SpectralWindow::new(Cutoff::gaussian(1.0, 0.3), Cutoff::gaussian(2.0, 0.07));
    let mirrored = SpectralWindow::new(w.chi, w.rho_hat.mirrored());
    for h in [0.02, 0.01] {
        let a = g_rho_predicted(std::slice::from_ref(&cyl), &w, &[1.0], &[h])?.total(1.0, h).unwrap_or_default();
        let b = g_rho_predicted(std::slice::from_ref(&cyl), &mirrored, &[1.0], &[h])?
            .total(1.0, h)
            .unwrap_or_default();
        t.add((a - b.conj()).norm() / a.norm());
    }
    Ok(t)
}

/// Invariant suite on the built-in fleet. Writes `check.json`.
pub fn cmd_check(cfg: &RunConfig, ctx: &Context) -> Result<CheckReport> {
    let spec = cfg.check_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let checks = vec![
        finish("jump-orientation", 1e-10, jump_orientation()),
        finish("energy-conservation", 1e-7, energy_conservation(&mut rng, spec.samples)),
        finish("orbit-invariants", 1e-6, orbit_invariants()),
        finish("hamilton-jacobi", 1e-6, hamilton_jacobi()),
        finish("van-vleck-composition", 1e-6, van_vleck(&mut rng, spec.samples)),
        finish("reflection-law", 0.05, reflection_law(spec.corrupt_jump_factor)),
        finish("scattering-unitarity", 1e-6, scattering_unitarity()),
        finish("convention", crate::quantum::CONVENTION_TOL, convention()),
        finish("time-reversal", 1e-12, time_reversal()),
    ];
    for c in &checks {
        ctx.log(format!("{:<24} {} (worst {:.3e}, tol {:.1e})", c.name, if c.passed { "ok" } else { "FAIL" }, c.worst, c.tolerance));
    }
    let report = CheckReport { pass: checks.iter().all(|c| c.passed), checks };
    std::fs::create_dir_all(&ctx.out)?;
    serde_json::to_writer_pretty(std::fs::File::create(ctx.out.join("check.json"))?, &report)?;
    Ok(report)
}
