use super::window::SpectralWindow;
use crate::branchflow::{dot, norm_sq, BranchChoice, BranchingTrajectory, FlowConfig, ReflectionEvent};
use crate::error::{Error, Result};
use crate::orbits::OrbitCylinder;
use crate::potential::PotentialModel;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

/// `i^k0 J / (2 xi_N)^(k0 + 2)`.
pub fn reflection_coefficient_from(k0: u32, jump: f64, xi_n: f64) -> Complex64 {
    Complex64::i().powu(k0) * jump / (2.0 * xi_n).powi(k0 as i32 + 2)
}

fn event_energy(model: &PotentialModel, ev: &ReflectionEvent) -> f64 {
    norm_sq(&ev.hit.xi_in) + model.eval_potential(&ev.hit.y)
}

fn glancing_guard(model: &PotentialModel, ev: &ReflectionEvent) -> Result<()> {
    let eps = FlowConfig::default().glancing_threshold(event_energy(model, ev));
    if ev.hit.xi_n <= eps {
        return Err(Error::GlancingEvent { t: ev.hit.t });
    }
    Ok(())
}

/// Coefficient of one event with `J` oriented from the incident side toward
/// the far side.
pub fn reflection_coefficient(model: &PotentialModel, ev: &ReflectionEvent) -> Result<Complex64> {
    glancing_guard(model, ev)?;
    let j = model.jump_on(ev.hit.component, &ev.hit.y, &ev.hit.normal)?;
    Ok(reflection_coefficient_from(model.k0, j, ev.hit.xi_n))
}

/// Same coefficient with `xi_N = (E - V(y))^{1/2} cos(theta)`, the angle
/// taken between the incoming momentum and the normal.
pub fn reflection_coefficient_on_shell(model: &PotentialModel, ev: &ReflectionEvent, energy: f64) -> Result<Complex64> {
    glancing_guard(model, ev)?;
    let j = model.jump_on(ev.hit.component, &ev.hit.y, &ev.hit.normal)?;
    let cos = dot(&ev.hit.xi_in, &ev.hit.normal) / norm_sq(&ev.hit.xi_in).sqrt();
    let xi_n = (energy - model.eval_potential(&ev.hit.y)).sqrt() * cos;
    Ok(reflection_coefficient_from(model.k0, j, xi_n))
}

/// Product over reflections; transmissions contribute 1.
pub fn orbit_reflection_product(model: &PotentialModel, tr: &BranchingTrajectory) -> Result<Complex64> {
    let mut r = Complex64::new(1.0, 0.0);
    for ev in tr.events.iter().filter(|e| e.choice == BranchChoice::Reflect) {
        r *= reflection_coefficient(model, ev)?;
    }
    Ok(r)
}

/// Contribution of one cylinder at `(E, h)` for positive times:
/// `(1/2pi) h^{k0 N} i^{-sigma} chi(E) rho_hat(T) e^{i(ET + S)/h} T_prim R / |det(I - P)|^{1/2}`.
pub fn trace_amplitude(cylinder: &OrbitCylinder, window: &SpectralWindow, e: f64, h: f64) -> Result<Complex64> {
    let smp = cylinder
        .sample(e)
        .ok_or_else(|| Error::InvalidModel(format!("cylinder does not provide an admissible orbit at E = {e}")))?;
    if !window.rho_hat.contains(smp.period) {
        return Err(Error::WindowMismatch { period: smp.period });
    }
    Ok(bare_amplitude(cylinder, e, h)? * window.rho_hat(smp.period) * window.chi(e))
}

/// Everything except `chi` and `rho_hat`.
fn bare_amplitude(cylinder: &OrbitCylinder, e: f64, h: f64) -> Result<Complex64> {
    let smp = cylinder
        .sample(e)
        .ok_or_else(|| Error::InvalidModel(format!("cylinder does not provide an admissible orbit at E = {e}")))?;
    let k0 = cylinder.orbits[0].k0;
    let power = h.powi((k0 as usize * smp.reflections) as i32);
    let maslov = Complex64::i().powu(smp.morse_index as u32 % 4).inv();
    let phase = Complex64::from_polar(1.0, (e * smp.period + smp.action) / h);
    Ok(power * maslov * phase * smp.primitive_period / smp.poincare_det.abs().sqrt() * smp.reflection_product / (2.0 * PI))
}

#[derive(Clone, Debug, Serialize)]
pub struct PredictionRow {
    pub energy: f64,
    pub h: f64,
    pub cylinder: usize,
    pub amplitude: Complex64,
    pub period: f64,
    pub action: f64,
    pub sigma: usize,
    pub reflections: usize,
    pub poincare_det: f64,
    pub reflection_product: Complex64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TracePrediction {
    pub rows: Vec<PredictionRow>,
    /// `(E, h, total)` in grid order.
    pub totals: Vec<(f64, f64, Complex64)>,
}

impl TracePrediction {
    pub fn total(&self, e: f64, h: f64) -> Option<Complex64> {
        self.totals.iter().find(|(a, b, _)| *a == e && *b == h).map(|t| t.2)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "E", "h", "cylinder", "Re", "Im", "abs", "T", "S", "sigma", "N", "detIP", "R_re", "R_im",
        ])?;
        let f = |x: f64| format!("{x:.16e}");
        for r in &self.rows {
            out.write_record([
                f(r.energy),
                f(r.h),
                r.cylinder.to_string(),
                f(r.amplitude.re),
                f(r.amplitude.im),
                f(r.amplitude.norm()),
                f(r.period),
                f(r.action),
                r.sigma.to_string(),
                r.reflections.to_string(),
                f(r.poincare_det),
                f(r.reflection_product.re),
                f(r.reflection_product.im),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Sums both time orientations of every admissible cylinder: the orbit at
/// `+T` weighted by `rho_hat(T)` and its reversal at `-T`, whose amplitude
/// is the complex conjugate, weighted by `rho_hat(-T)`. Cylinders whose
/// period misses `supp rho_hat` contribute nothing.
pub fn g_rho_predicted(
    cylinders: &[OrbitCylinder],
    window: &SpectralWindow,
    energies: &[f64],
    hs: &[f64],
) -> Result<TracePrediction> {
    let grid: Vec<(f64, f64)> = hs.iter().flat_map(|&h| energies.iter().map(move |&e| (e, h))).collect();
    let per_point: Vec<Result<Vec<PredictionRow>>> = grid
        .par_iter()
        .map(|&(e, h)| {
            let mut rows = Vec::new();
            for (id, cyl) in cylinders.iter().enumerate() {
                let Some(smp) = cyl.sample(e) else { continue };
                let fwd = window.rho_hat(smp.period);
                let bwd = window.rho_hat(-smp.period);
                let chi = window.chi(e);
                if (fwd == 0.0 && bwd == 0.0) || chi == 0.0 {
                    continue;
                }
                let a = bare_amplitude(cyl, e, h)?;
                rows.push(PredictionRow {
                    energy: e,
                    h,
                    cylinder: id,
                    amplitude: chi * (a * fwd + a.conj() * bwd),
                    period: smp.period,
                    action: smp.action,
                    sigma: smp.morse_index,
                    reflections: smp.reflections,
                    poincare_det: smp.poincare_det,
                    reflection_product: smp.reflection_product,
                });
            }
            Ok(rows)
        })
        .collect();
    let mut pred = TracePrediction::default();
    for (&(e, h), rows) in grid.iter().zip(per_point) {
        let rows = rows?;
        let total = rows.iter().map(|r| r.amplitude).sum();
        pred.totals.push((e, h, total));
        pred.rows.extend(rows);
    }
    Ok(pred)
}
