use crate::error::{Error, Result};
use crate::jet::CJet;
use crate::ode::{self, Options};
use crate::potential::PotentialModel;
use num_complex::Complex64;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct ScatteringResult {
    pub energy: f64,
    pub h: f64,
    /// Reflected over incident amplitude at `x = 0`.
    pub r: Complex64,
    pub reflection: f64,
    pub transmission: f64,
    /// Point where the outgoing condition is imposed.
    pub boundary: f64,
    /// Terms kept in the Riccati series.
    pub riccati_terms: usize,
    pub note: String,
}

const MAX_TERMS: usize = 40;
/// The outgoing condition is imposed this fraction of the way to the first
/// turning point. Close to the interface the truncated series is accurate to
/// `exp(-2 A / h)`, `A` the action from the interface to the turning point;
/// further in, the turning-point echo leaks into the result.
pub const BOUNDARY_FRACTION: f64 = 1e-3;

/// `u'/u` of the right-moving solution at `x`, summed to the smallest term
/// of the asymptotic Riccati series of `h y' + y^2 = V - E`.
fn outgoing_log_derivative(model: &PotentialModel, x: f64, e: f64, h: f64) -> Result<(Complex64, usize)> {
    let region = model.region_of(&[x]);
    let degree = MAX_TERMS + 2;
    let v = model.line_jet_in(&[x], &[1.0], region, degree);
    let kin = v.scale(-1.0).add_scalar(e);
    if kin.value() <= 0.0 {
        return Err(Error::BoundaryConditionInvalid(format!(
            "no propagating wave at x = {x}: E - V = {}",
            kin.value()
        )));
    }
    let y0 = CJet::from_real(&kin.sqrt()).scale(Complex64::i());
    let inv = y0.scale(Complex64::new(2.0, 0.0)).recip();
    let mut ys = vec![y0];
    let mut terms = vec![ys[0].value()];
    for n in 1..MAX_TERMS {
        let deg = degree - n;
        let mut acc = ys[n - 1].derivative().truncate(deg);
        for k in 1..n {
            acc = acc.add(&ys[k].truncate(deg).mul(&ys[n - k].truncate(deg)));
        }
        let yn = acc.mul(&inv.truncate(deg)).scale(Complex64::new(-1.0, 0.0));
        terms.push(yn.value() * h.powi(n as i32));
        ys.push(yn);
    }
    // Stop before the smallest consecutive pair; pairs because odd or even
    // terms can vanish identically at special points.
    let pair = |n: usize| terms[n].norm() + terms[n + 1].norm();
    let kept = (1..MAX_TERMS - 1)
        .min_by(|&a, &b| pair(a).total_cmp(&pair(b)))
        .unwrap_or(1);
    let total: Complex64 = terms[..kept].iter().sum();
    Ok((total / h, kept))
}

/// Reflection off a potential that vanishes for `x < 0` and has no turning
/// point on `[0, boundary]`. The solution is the outgoing asymptotic one at
/// the boundary, integrated back to `0` and split into `e^{+-i xi x / h}`.
pub fn scattering_reflection_1d(model: &PotentialModel, e: f64, h: f64) -> Result<ScatteringResult> {
    if model.dimension != 1 || e <= 0.0 {
        return Err(Error::BoundaryConditionInvalid("need a 1D model and E > 0".into()));
    }
    for x in [-0.5, -0.1, -1e-3] {
        if model.eval_potential(&[x]) != 0.0 {
            return Err(Error::BoundaryConditionInvalid("potential must vanish on x < 0".into()));
        }
    }
    let mut turning = None;
    let k = 2000;
    for j in 1..=k {
        let x = 4.0 * j as f64 / k as f64;
        if model.eval_potential(&[x]) >= e {
            turning = Some(x);
            break;
        }
    }
    let boundary = turning.map_or(BOUNDARY_FRACTION, |t| BOUNDARY_FRACTION * t);
    let (dlog, terms) = outgoing_log_derivative(model, boundary, e, h)?;
    // s = boundary - x, state (u, u') as four reals
    let region = model.region_of(&[0.5 * boundary]);
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
        let x = boundary - s;
        let w = (model.value_in(&[x], region) - e) / (h * h);
        dy[0] = -y[2];
        dy[1] = -y[3];
        dy[2] = -w * y[0];
        dy[3] = -w * y[1];
    };
    let opts = Options {
        rtol: 1e-12,
        atol: 1e-14,
        ..Options::default()
    };
    let out = ode::integrate(rhs, 0.0, &[1.0, 0.0, dlog.re, dlog.im], boundary, &opts, None)
        .map_err(|_| Error::StiffnessFailure)?;
    let u = Complex64::new(out.y[0], out.y[1]);
    let du = Complex64::new(out.y[2], out.y[3]);
    let xi = e.sqrt();
    let ik = Complex64::new(0.0, xi / h);
    let incident = 0.5 * (u + du / ik);
    let reflected = 0.5 * (u - du / ik);
    // probability flux h Im(conj(u) u') at the boundary
    let flux_out = h * dlog.im;
    let flux_in = xi * incident.norm_sqr();
    let r = reflected / incident;
    Ok(ScatteringResult {
        energy: e,
        h,
        r,
        reflection: r.norm_sqr(),
        transmission: flux_out / flux_in,
        boundary,
        riccati_terms: terms,
        note: "outgoing condition from the optimally truncated Riccati series at the boundary".into(),
    })
}
