//! Closed branching orbits: Newton shooting on a transversal section,
//! continuation in energy, and length-spectrum enumeration.

use crate::branchflow::{
    classify_hit, departure_region, dot, flow_segment_in, flow_with_itinerary, norm_sq, reflections,
    apply_branch, BranchChoice, BranchingTrajectory, FlowConfig, HitClass, PhasePoint,
};
use crate::error::{Error, Result};
use crate::potential::{Coord, PotentialModel, Region};
use crate::semiclassics::orbit_reflection_product;
use crate::variational::{
    action, char_poly, integrate_monodromy, morse_index, poincare_det, poincare_routes, scan_conjugate,
    symplectic_defect, unit_multiplicity, PoincareDet,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Search and Newton settings.
#[derive(Clone, Copy, Debug)]
pub struct OrbitOptions {
    pub flow: FlowConfig,
    pub newton_tol: f64,
    pub max_iter: usize,
    /// Eigenvalues within this distance of 1 count toward its multiplicity.
    pub unit_tol: f64,
    /// Largest polygon tried by the 2D seeding.
    pub polygon_max: usize,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions {
            flow: FlowConfig::default(),
            newton_tol: 1e-9,
            max_iter: 50,
            unit_tol: 1e-4,
            polygon_max: 6,
        }
    }
}

/// Where the Morse index came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MorseSource {
    /// Index of the spacetime Hessian plus conjugate points.
    Hessian,
    /// Base point conjugate to itself: conjugate points on `(0, T]`.
    ConjugateCount,
}

/// One event of the orbit, reduced to what identifies it up to base point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EventKey {
    pub choice: BranchChoice,
    pub component: usize,
    pub from_plus: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosedOrbit {
    pub energy: f64,
    pub k0: u32,
    pub period: f64,
    pub primitive_period: f64,
    pub repetition: usize,
    pub base: PhasePoint,
    pub itinerary: Vec<BranchChoice>,
    pub reflections: usize,
    pub signature: Vec<EventKey>,
    pub action: f64,
    pub monodromy: DMatrix<f64>,
    pub symplectic_defect: f64,
    pub closure_residual: f64,
    pub unit_multiplicity: usize,
    pub degenerate: bool,
    pub poincare: Option<PoincareDet>,
    /// Both Poincaré routes, evaluated even when the orbit is degenerate.
    pub poincare_routes: (f64, Option<f64>),
    pub morse_index: Option<usize>,
    pub morse_source: Option<MorseSource>,
    pub hessian_index: Option<usize>,
    pub conjugate_count: usize,
    pub reflection_product: Complex64,
    pub near_glancing: bool,
    pub min_normal_momentum: f64,
    #[serde(skip)]
    pub trajectory: BranchingTrajectory,
}

impl ClosedOrbit {
    pub fn velocity(&self) -> Vec<f64> {
        self.base.xi.iter().map(|v| 2.0 * v).collect()
    }

    /// Usable in trace predictions.
    pub fn admissible(&self) -> bool {
        !self.degenerate && !self.near_glancing && self.morse_index.is_some() && self.poincare.is_some()
    }
}

impl ClosedOrbit {
    /// Same orbit with base point moved forward by `dt`, recomputed from
    /// scratch.
    pub fn shifted(&self, model: &PotentialModel, dt: f64, opts: &OrbitOptions) -> Result<ClosedOrbit> {
        let tr = &self.trajectory;
        let dt = dt.rem_euclid(self.period);
        let start = tr.state_at(dt);
        let passed = tr.events.iter().filter(|e| e.t() <= dt).count();
        let hyper: Vec<BranchChoice> = tr.events.iter().map(|e| e.choice).collect();
        let mut word = hyper[passed..].to_vec();
        word.extend_from_slice(&hyper[..passed]);
        let flow = FlowConfig { strict: true, ..opts.flow };
        let moved = flow_with_itinerary(model, &start, &word, self.period, &flow)?;
        build_orbit(model, moved, opts)
    }
}

/// Transversal section `(x - point) . normal = 0`.
#[derive(Clone, Debug)]
pub struct Section {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
}

impl Section {
    pub fn through(p: &PhasePoint) -> Self {
        let nrm = norm_sq(&p.xi).sqrt();
        Section {
            point: p.x.clone(),
            normal: p.xi.iter().map(|v| v / nrm).collect(),
        }
    }
}

fn scale_to_energy(model: &PotentialModel, p: &PhasePoint, e: f64) -> Result<PhasePoint> {
    let kin = e - model.eval_potential(&p.x);
    let cur = norm_sq(&p.xi);
    if kin <= 0.0 || cur == 0.0 {
        return Err(Error::NoConvergence { residual: kin });
    }
    let s = (kin / cur).sqrt();
    Ok(PhasePoint::new(p.x.clone(), p.xi.iter().map(|v| v * s).collect()))
}

/// Newton shooting for `Phi_T(p0) = p0` on the energy surface and a
/// transversal section through the guess.
pub fn find_closed_orbit(
    model: &PotentialModel,
    energy: f64,
    itinerary: &[BranchChoice],
    guess: &PhasePoint,
    t_guess: f64,
    opts: &OrbitOptions,
) -> Result<ClosedOrbit> {
    let g = scale_to_energy(model, guess, energy)?;
    let section = Section::through(&g);
    find_closed_orbit_on(model, energy, itinerary, &g, t_guess, &section, opts)
}

pub fn find_closed_orbit_on(
    model: &PotentialModel,
    energy: f64,
    itinerary: &[BranchChoice],
    guess: &PhasePoint,
    t_guess: f64,
    section: &Section,
    opts: &OrbitOptions,
) -> Result<ClosedOrbit> {
    let n = model.dimension;
    let flow = FlowConfig { strict: true, ..opts.flow };
    let mut z: Vec<f64> = scale_to_energy(model, guess, energy)?.to_state();
    z.push(t_guess);
    let residual = |z: &[f64]| -> Result<(Vec<f64>, BranchingTrajectory)> {
        let p0 = PhasePoint::from_state(z, n);
        let tr = flow_with_itinerary(model, &p0, itinerary, z[2 * n], &flow)?;
        let end = tr.final_point.to_state();
        let mut r: Vec<f64> = (0..2 * n).map(|i| end[i] - z[i]).collect();
        r.push(p0.energy(model) - energy);
        r.push(dot(&(0..n).map(|i| z[i] - section.point[i]).collect::<Vec<_>>(), &section.normal));
        Ok((r, tr))
    };
    let (mut r, mut tr) = residual(&z)?;
    let mut rn = norm_sq(&r).sqrt();
    for _ in 0..opts.max_iter {
        if rn < opts.newton_tol {
            break;
        }
        if !tr.glancing.is_empty() {
            return Err(Error::NearGlancing);
        }
        let mono = integrate_monodromy(model, &tr, &flow)?;
        let m = 2 * n;
        let rows = m + 2;
        let mut jac = DMatrix::<f64>::zeros(rows, m + 1);
        let end = &tr.final_point;
        let grad_end = model.gradient_in(&end.x, tr.final_region);
        for i in 0..m {
            for j in 0..m {
                jac[(i, j)] = mono.matrix[(i, j)] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for i in 0..n {
            jac[(i, m)] = 2.0 * end.xi[i];
            jac[(n + i, m)] = -grad_end[i];
        }
        let p0 = PhasePoint::from_state(&z, n);
        let grad0 = model.gradient_in(&p0.x, departure_region(model, &p0));
        for i in 0..n {
            jac[(m, i)] = grad0[i];
            jac[(m, n + i)] = 2.0 * p0.xi[i];
            jac[(m + 1, i)] = section.normal[i];
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd
            .solve(&DVector::from_vec(r.clone()), 1e-10 * smax)
            .map_err(|_| Error::DegenerateJacobian)?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateJacobian);
        }
        // damped update
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a - lambda * d).collect();
            if let Ok((r2, tr2)) = residual(&trial) {
                let rn2 = norm_sq(&r2).sqrt();
                if rn2 < rn || rn2 < opts.newton_tol {
                    z = trial;
                    r = r2;
                    tr = tr2;
                    rn = rn2;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            let smin = svd.singular_values.min();
            if smin < 1e-10 * smax {
                return Err(Error::DegenerateJacobian);
            }
            return Err(Error::NoConvergence { residual: rn });
        }
    }
    if rn >= opts.newton_tol {
        return Err(Error::NoConvergence { residual: rn });
    }
    if !tr.glancing.is_empty() {
        return Err(Error::NearGlancing);
    }
    let _ = &r;
    build_orbit(model, tr, opts)
}

/// Computes all invariants of a converged orbit trajectory.
pub fn build_orbit(model: &PotentialModel, tr: BranchingTrajectory, opts: &OrbitOptions) -> Result<ClosedOrbit> {
    let n = model.dimension;
    let flow = opts.flow;
    let mono = integrate_monodromy(model, &tr, &flow)?;
    let base = tr.initial.clone();
    let period = tr.total_time;
    let velocity: Vec<f64> = base.xi.iter().map(|v| 2.0 * v).collect();
    let closure_residual = {
        let a = tr.final_point.to_state();
        let b = base.to_state();
        a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
    };
    // Jordan blocks at 1 split by the square root of the integration error
    let tol = opts.unit_tol * mono.matrix.norm().sqrt().max(1.0);
    let mult = unit_multiplicity(&mono.matrix, tol);
    let cp = char_poly(&mono.matrix);
    let q_scale: f64 = cp
        .iter()
        .enumerate()
        .map(|(k, c)| c.abs() * (k * k.saturating_sub(1)) as f64 / 2.0)
        .sum();
    let routes = poincare_routes(&mono.matrix, &velocity);
    let degenerate = mult > 2 || routes.0.abs() < 1e-7 * q_scale;
    let poincare = if degenerate {
        None
    } else {
        poincare_det(&mono.matrix, &velocity, tol).ok()
    };
    let (morse, source, hindex, mu) = match morse_index(&mono, &velocity) {
        Ok(mi) => (Some(mi.sigma), Some(MorseSource::Hessian), Some(mi.hessian_index), mi.mu),
        Err(Error::SelfConjugate) => {
            let info = scan_conjugate(&mono)?;
            let xe = mono.matrix.view((0, n), (n, n)).into_owned();
            let sv = xe.svd(false, false).singular_values;
            let scale = mono.pieces.iter().map(|p| {
                let y = p.dense.eval(p.t1);
                y[2 * n..].iter().fold(0.0f64, |a, v| a.max(v.abs()))
            }).fold(0.0f64, f64::max);
            let end_mult = sv.iter().filter(|s| **s < 1e-6 * scale).count();
            (Some(info.count + end_mult), Some(MorseSource::ConjugateCount), None, info.count)
        }
        Err(_) => {
            let mu = scan_conjugate(&mono).map(|i| i.count).unwrap_or(0);
            (None, None, None, mu)
        }
    };
    let eps_g = flow.glancing_threshold(tr.energy);
    let min_xi = tr.min_normal_momentum();
    let signature: Vec<EventKey> = tr
        .events
        .iter()
        .map(|e| EventKey {
            choice: e.choice,
            component: e.hit.component,
            from_plus: e.hit.from_plus,
        })
        .collect();
    let repetition = repetition_count(&tr, &base, &signature);
    let r = orbit_reflection_product(model, &tr)?;
    Ok(ClosedOrbit {
        energy: tr.energy,
        k0: model.k0,
        period,
        primitive_period: period / repetition as f64,
        repetition,
        itinerary: tr.itinerary(),
        reflections: tr.reflection_count(),
        signature,
        action: action(model, &tr),
        symplectic_defect: symplectic_defect(&mono.matrix),
        monodromy: mono.matrix,
        closure_residual,
        unit_multiplicity: mult,
        degenerate,
        poincare,
        poincare_routes: routes,
        morse_index: morse,
        morse_source: source,
        hessian_index: hindex,
        conjugate_count: mu,
        reflection_product: r,
        near_glancing: min_xi < 10.0 * eps_g,
        min_normal_momentum: min_xi,
        base,
        trajectory: tr,
    })
}

fn repetition_count(tr: &BranchingTrajectory, base: &PhasePoint, sig: &[EventKey]) -> usize {
    let t = tr.total_time;
    let scale = 1.0 + norm_sq(&base.to_state()).sqrt();
    for m in (2..=12).rev() {
        if !sig.is_empty() && sig.len() % m != 0 {
            continue;
        }
        let k = sig.len() / m;
        if (0..sig.len()).any(|i| sig[i] != sig[i % k.max(1)]) {
            continue;
        }
        let ok = (1..m).all(|j| {
            let p = tr.state_at(t * j as f64 / m as f64);
            let d = p
                .to_state()
                .iter()
                .zip(base.to_state())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            d < 1e-7 * scale
        });
        if ok {
            return m;
        }
    }
    1
}

/// Natural cubic spline through `(xs, ys)`.
#[derive(Clone, Debug, Serialize)]
pub struct Spline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let k = xs.len();
        let mut m = vec![0.0; k];
        if k > 2 {
            // tridiagonal solve for second derivatives
            let mut c = vec![0.0; k];
            let mut d = vec![0.0; k];
            for i in 1..k - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let rhs = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
                let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
                c[i] = h1 / diag;
                d[i] = (rhs - h0 * d[i - 1]) / diag;
            }
            for i in (1..k - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        Spline { xs, ys, m }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.xs.len();
        if k == 1 {
            return self.ys[0];
        }
        let i = self.xs.partition_point(|v| *v <= x).clamp(1, k - 1) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Energy-parametrized family of closed orbits.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitCylinder {
    pub energies: Vec<f64>,
    pub orbits: Vec<ClosedOrbit>,
    pub period: Spline,
    pub action: Spline,
}

/// Interpolated cylinder data at one energy.
#[derive(Clone, Debug, Serialize)]
pub struct CylinderSample {
    pub energy: f64,
    pub period: f64,
    pub primitive_period: f64,
    pub action: f64,
    pub poincare_det: f64,
    pub morse_index: usize,
    pub reflections: usize,
    pub reflection_product: Complex64,
}

impl OrbitCylinder {
    pub fn from_orbits(orbits: Vec<ClosedOrbit>) -> Self {
        let energies: Vec<f64> = orbits.iter().map(|o| o.energy).collect();
        let period = Spline::new(energies.clone(), orbits.iter().map(|o| o.period).collect());
        let action = Spline::new(energies.clone(), orbits.iter().map(|o| o.action).collect());
        OrbitCylinder { energies, orbits, period, action }
    }

    pub fn covers(&self, e: f64) -> bool {
        let lo = self.energies.first().copied().unwrap_or(f64::NAN);
        let hi = self.energies.last().copied().unwrap_or(f64::NAN);
        e >= lo - 1e-12 && e <= hi + 1e-12
    }

    pub fn admissible(&self) -> bool {
        self.orbits.iter().all(|o| o.admissible())
    }

    pub fn sample(&self, e: f64) -> Option<CylinderSample> {
        if !self.covers(e) || !self.admissible() {
            return None;
        }
        let nearest = self
            .orbits
            .iter()
            .min_by(|a, b| (a.energy - e).abs().partial_cmp(&(b.energy - e).abs()).unwrap())?;
        let spline = |f: &dyn Fn(&ClosedOrbit) -> f64| {
            Spline::new(self.energies.clone(), self.orbits.iter().map(f).collect()).eval(e)
        };
        let period = self.period.eval(e);
        Some(CylinderSample {
            energy: e,
            period,
            primitive_period: period / nearest.repetition as f64,
            action: self.action.eval(e),
            poincare_det: spline(&|o| o.poincare.as_ref().map_or(f64::NAN, |p| p.route_poly)),
            morse_index: nearest.morse_index.unwrap_or(0),
            reflections: nearest.reflections,
            reflection_product: Complex64::new(
                spline(&|o| o.reflection_product.re),
                spline(&|o| o.reflection_product.im),
            ),
        })
    }

    /// Largest `|d(S + E T)/dE - T|` by fourth-order differences on a
    /// uniform grid.
    pub fn hamilton_jacobi_defect(&self) -> f64 {
        let e = &self.energies;
        let k = e.len();
        if k < 5 {
            return f64::NAN;
        }
        let f: Vec<f64> = self.orbits.iter().map(|o| o.action + o.energy * o.period).collect();
        let h = e[1] - e[0];
        (2..k - 2)
            .map(|i| {
                let d = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
                (d - self.orbits[i].period).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Predictor–corrector continuation over `n_samples` equally spaced
/// energies in `e_range`, keeping the seed's section.
pub fn continue_cylinder(
    model: &PotentialModel,
    seed: &ClosedOrbit,
    e_range: (f64, f64),
    n_samples: usize,
    opts: &OrbitOptions,
) -> Result<OrbitCylinder> {
    let k = n_samples.max(2);
    let energies: Vec<f64> = (0..k)
        .map(|i| e_range.0 + (e_range.1 - e_range.0) * i as f64 / (k - 1) as f64)
        .collect();
    let section = Section::through(&seed.base);
    let start = energies
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - seed.energy).abs().partial_cmp(&(b.1 - seed.energy).abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut slots: Vec<Option<ClosedOrbit>> = vec![None; k];
    let correct = |prev: &ClosedOrbit, before: Option<&ClosedOrbit>, e: f64| -> Result<ClosedOrbit> {
        let slope = before.map_or(0.0, |b| (prev.period - b.period) / (prev.energy - b.energy));
        let mut from = prev.clone();
        let mut de = e - prev.energy;
        // subdivide the step when the corrector fails
        for _ in 0..6 {
            let target = from.energy + de;
            let guess = scale_to_energy(model, &from.base, target);
            let attempt = guess.and_then(|g| {
                find_closed_orbit_on(model, target, &from.itinerary, &g, from.period + slope * de, &section, opts)
            });
            match attempt {
                Ok(o) if o.itinerary == seed.itinerary => {
                    if (target - e).abs() < 1e-14 {
                        return Ok(o);
                    }
                    from = o;
                    de = e - from.energy;
                }
                _ => de *= 0.5,
            }
        }
        Err(Error::ContinuationStall { energy: e })
    };
    slots[start] = Some(correct(seed, None, energies[start])?);
    for i in start + 1..k {
        let prev = slots[i - 1].clone().unwrap();
        let before = if i >= start + 2 { slots[i - 2].clone() } else { None };
        slots[i] = Some(correct(&prev, before.as_ref(), energies[i])?);
    }
    for i in (0..start).rev() {
        let prev = slots[i + 1].clone().unwrap();
        let before = if i + 2 <= start { slots[i + 2].clone() } else { None };
        slots[i] = Some(correct(&prev, before.as_ref(), energies[i])?);
    }
    Ok(OrbitCylinder::from_orbits(slots.into_iter().map(|o| o.unwrap()).collect()))
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumEntry {
    pub period: f64,
    pub energy: f64,
    pub itinerary: Vec<BranchChoice>,
    pub reflections: usize,
    pub orbit: ClosedOrbit,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LengthSpectrum {
    pub entries: Vec<SpectrumEntry>,
}

impl LengthSpectrum {
    pub fn periods(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.period).collect()
    }
}

/// Lexicographically least rotation, so orbits found from different base
/// points compare equal.
fn canonical_rotation(sig: &[EventKey]) -> Vec<EventKey> {
    (0..sig.len().max(1))
        .map(|s| sig.iter().cycle().skip(s).take(sig.len()).cloned().collect::<Vec<_>>())
        .min()
        .unwrap_or_default()
}

/// Initial conditions whose flowout is scanned for returns.
pub fn seeds(model: &PotentialModel, energy: f64, opts: &OrbitOptions) -> Vec<PhasePoint> {
    match model.dimension {
        1 => seeds_1d(model, energy),
        _ => seeds_2d(model, energy, opts),
    }
}

fn seeds_1d(model: &PotentialModel, energy: f64) -> Vec<PhasePoint> {
    let r = if model.confinement.confining {
        model.turning_radius(energy) * 1.05
    } else {
        20.0
    };
    let mut cuts: Vec<f64> = model
        .interfaces
        .iter()
        .flat_map(|i| i.sample_points(1, 1))
        .map(|p| p[0])
        .filter(|x| x.abs() < r)
        .collect();
    cuts.push(-r);
    cuts.push(r);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        // allowed sub-intervals of this piece
        let k = 400;
        let xs: Vec<f64> = (0..=k).map(|j| w[0] + (w[1] - w[0]) * j as f64 / k as f64).collect();
        let mut start: Option<f64> = None;
        for (j, &x) in xs.iter().enumerate() {
            let allowed = model.eval_potential(&[x]) < energy && j > 0 && j < k;
            match (allowed, start) {
                (true, None) => start = Some(x),
                (false, Some(s)) => {
                    let mid = 0.5 * (s + xs[j - 1]);
                    if xs[j - 1] > s {
                        out.push(mid);
                    }
                    start = None;
                }
                _ => {}
            }
        }
    }
    out.into_iter()
        .filter_map(|x| {
            let kin = energy - model.eval_potential(&[x]);
            (kin > 0.0).then(|| PhasePoint::new(vec![x], vec![kin.sqrt()]))
        })
        .collect()
}

fn seeds_2d(model: &PotentialModel, energy: f64, opts: &OrbitOptions) -> Vec<PhasePoint> {
    let mut out = Vec::new();
    let mut push = |x: Vec<f64>, dir: [f64; 2]| {
        let kin = energy - model.eval_potential(&x);
        if kin > 0.0 {
            let nn = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
            let s = kin.sqrt() / nn;
            out.push(PhasePoint::new(x, vec![dir[0] * s, dir[1] * s]));
        }
    };
    let mut centers = Vec::new();
    for itf in &model.interfaces {
        if let Coord::Elliptic { center, scales } = &itf.defining.coord {
            centers.push((center.clone(), scales.clone()));
        }
    }
    if centers.is_empty() {
        centers.push((vec![0.0, 0.0], vec![1.0, 1.0]));
    }
    for (c, s) in centers {
        push(c.clone(), [1.0, 0.0]);
        push(c.clone(), [0.0, 1.0]);
        if model.interfaces.is_empty() {
            continue;
        }
        for k in 3..=opts.polygon_max {
            for offset in [0.0, PI / k as f64] {
                let vtx = |j: usize| {
                    let th = offset + 2.0 * PI * j as f64 / k as f64;
                    [c[0] + s[0] * th.cos(), c[1] + s[1] * th.sin()]
                };
                let (a, b) = (vtx(0), vtx(1));
                let mid = vec![0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                push(mid.clone(), [b[0] - a[0], b[1] - a[1]]);
                push(mid, [a[0] - b[0], a[1] - b[1]]);
            }
        }
    }
    out
}

/// Returns of the flowout of `p0` to `p0` (1D: same point and direction;
/// 2D: section crossing close to `p0`) with `t <= l_max`.
fn scan_returns(
    model: &PotentialModel,
    p0: &PhasePoint,
    l_max: f64,
    n_max: usize,
    opts: &OrbitOptions,
) -> Result<Vec<(f64, Vec<BranchChoice>, PhasePoint)>> {
    let n = model.dimension;
    let cfg = opts.flow;
    let eps_g = cfg.glancing_threshold(p0.energy(model));
    let section = Section::through(p0);
    let scale = 1.0 + norm_sq(&p0.x).sqrt();
    let side = |x: &[f64]| -> f64 { (0..n).map(|i| (x[i] - section.point[i]) * section.normal[i]).sum() };
    let mut found = Vec::new();
    let mut stack = vec![(p0.clone(), departure_region(model, p0), 0.0, Vec::<BranchChoice>::new())];
    let mut nodes = 0usize;
    while let Some((p, region, t0, word)) = stack.pop() {
        nodes += 1;
        if nodes > cfg.branch_cap {
            return Err(Error::BranchExplosion { cap: cfg.branch_cap });
        }
        let (seg, hit) = flow_segment_in(model, &p, region, t0, l_max - t0, &cfg)?;
        // section crossings in the direction of p0
        let mesh = seg.dense.mesh();
        let mut prev = side(&seg.dense.eval(mesh[0])[..n]);
        for w in mesh.windows(2) {
            let cur = side(&seg.dense.eval(w[1])[..n]);
            if prev < 0.0 && cur >= 0.0 && w[1] > 1e-6 {
                let (mut lo, mut hi) = (w[0], w[1]);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if side(&seg.dense.eval(mid)[..n]) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let t = 0.5 * (lo + hi);
                let q = PhasePoint::from_state(&seg.dense.eval(t), n);
                let dist = q
                    .to_state()
                    .iter()
                    .zip(p0.to_state())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let tol = if n == 1 { 1e-6 } else { 0.15 } * scale;
                if dist < tol {
                    found.push((t, word.clone(), q));
                }
            }
            prev = cur;
        }
        let Some(hit) = hit.filter(|h| h.t < l_max) else { continue };
        let hyperbolic = classify_hit(&hit, eps_g) == HitClass::Hyperbolic;
        let mut choices = vec![BranchChoice::Transmit];
        if hyperbolic && reflections(&word) < n_max {
            choices.push(BranchChoice::Reflect);
        }
        for choice in choices {
            let q = apply_branch(&hit, choice, eps_g)?;
            let mut w = word.clone();
            if hyperbolic {
                w.push(choice);
            }
            let next_region = match choice {
                BranchChoice::Reflect => region,
                BranchChoice::Transmit => region.with_side(hit.component, !hit.from_plus),
            };
            stack.push((q, next_region, hit.t, w));
        }
    }
    let _ = Region(0);
    Ok(found)
}

/// Closed orbits with period at most `l_max` and at most `n_max`
/// reflections at each energy of `energies`.
pub fn length_spectrum(
    model: &PotentialModel,
    energies: &[f64],
    l_max: f64,
    n_max: usize,
    opts: &OrbitOptions,
) -> Result<LengthSpectrum> {
    let mut jobs = Vec::new();
    for &e in energies {
        for s in seeds(model, e, opts) {
            jobs.push((e, s));
        }
    }
    let results: Vec<Result<Vec<ClosedOrbit>>> = jobs
        .par_iter()
        .map(|(e, seed)| {
            let cands = scan_returns(model, seed, l_max * (1.0 + 1e-9), n_max, opts)?;
            let mut orbits = Vec::new();
            for (t, word, _) in cands {
                let guess = if model.dimension == 1 { seed.clone() } else { seed.clone() };
                if let Ok(o) = find_closed_orbit(model, *e, &word, &guess, t, opts) {
                    if o.period <= l_max + 1e-9 && o.reflections <= n_max {
                        orbits.push(o);
                    }
                }
            }
            Ok(orbits)
        })
        .collect();
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    // deduplicate by energy, period and canonical event signature
    all.sort_by(|a, b| {
        (a.energy, a.period)
            .partial_cmp(&(b.energy, b.period))
            .unwrap()
            .then_with(|| a.itinerary.cmp(&b.itinerary))
    });
    let mut entries: Vec<SpectrumEntry> = Vec::new();
    for o in all {
        let key = canonical_rotation(&o.signature);
        let dup = entries.iter().any(|e| {
            (e.energy - o.energy).abs() < 1e-12
                && (e.period - o.period).abs() < 1e-7
                && canonical_rotation(&e.orbit.signature) == key
                && (model.dimension == 1
                    || (o.degenerate && e.orbit.degenerate && turning_sense(&e.orbit) == turning_sense(&o))
                    || same_orbit(&e.orbit, &o))
        });
        if !dup {
            entries.push(SpectrumEntry {
                period: o.period,
                energy: o.energy,
                itinerary: o.itinerary.clone(),
                reflections: o.reflections,
                orbit: o,
            });
        }
    }
    entries.sort_by(|a, b| {
        (a.period, a.energy)
            .partial_cmp(&(b.period, b.energy))
            .unwrap()
            .then_with(|| a.itinerary.cmp(&b.itinerary))
    });
    Ok(LengthSpectrum { entries })
}

/// Sign of the planar angular momentum; members of one symmetry family
/// share it.
fn turning_sense(o: &ClosedOrbit) -> i8 {
    if o.base.x.len() != 2 {
        return 0;
    }
    let l = o.base.x[0] * o.base.xi[1] - o.base.x[1] * o.base.xi[0];
    if l > 1e-9 {
        1
    } else if l < -1e-9 {
        -1
    } else {
        0
    }
}

/// Whether `b`'s base point lies on `a`'s trajectory.
fn same_orbit(a: &ClosedOrbit, b: &ClosedOrbit) -> bool {
    let tr = &a.trajectory;
    let k = 2000;
    (0..k).any(|j| {
        let t = tr.total_time * j as f64 / k as f64;
        let p = tr.state_at(t);
        let d: f64 = p
            .to_state()
            .iter()
            .zip(b.base.to_state())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        d < 2e-2
    }) && {
        // refine: closest approach must be tight
        let mut best = f64::INFINITY;
        for j in 0..20000 {
            let t = tr.total_time * j as f64 / 20000.0;
            let p = tr.state_at(t);
            let d: f64 = p
                .to_state()
                .iter()
                .zip(b.base.to_state())
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
        }
        best < 1e-3
    }
}
