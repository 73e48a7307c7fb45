//! Linearized branching flow, action, action Hessians, Poincaré
//! determinants, conjugate points and Morse indices.

use crate::branchflow::{
    dot, flow_with_itinerary, norm_sq, BranchChoice, BranchingTrajectory, FlowConfig, PhasePoint,
    ReflectionEvent,
};
use crate::error::{Error, Result};
use crate::ode::{self, DenseSolution};
use crate::potential::{PotentialModel, Region};
use nalgebra::DMatrix;
use serde::Serialize;

/// Linearized flow along one piece between events.
#[derive(Clone, Debug)]
pub struct Piece {
    pub t0: f64,
    pub t1: f64,
    /// Reflections strictly before this piece.
    pub reflections_before: usize,
    /// Dense output of `(x, xi, Y)` with `Y` the row-major 2n x 2n tangent map.
    pub dense: DenseSolution,
}

#[derive(Clone, Debug)]
pub struct Monodromy {
    pub n: usize,
    pub matrix: DMatrix<f64>,
    pub jumps: Vec<(f64, DMatrix<f64>)>,
    pub pieces: Vec<Piece>,
}

impl Monodromy {
    /// Tangent map from time 0 to `t`.
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        let idx = self
            .pieces
            .partition_point(|p| p.t1 < t)
            .min(self.pieces.len() - 1);
        let y = self.pieces[idx].dense.eval(t);
        let m = 2 * self.n;
        DMatrix::from_row_slice(m, m, &y[m..m + m * m])
    }

    pub fn symplectic_defect(&self) -> f64 {
        symplectic_defect(&self.matrix)
    }
}

pub fn omega(n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        w[(i, n + i)] = 1.0;
        w[(n + i, i)] = -1.0;
    }
    w
}

pub fn symplectic_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows() / 2;
    let w = omega(n);
    (m.transpose() * &w * m - w).amax()
}

/// Blocks `(X_y, X_eta, Xi_y, Xi_eta)` of a tangent map.
pub fn blocks(m: &DMatrix<f64>) -> [DMatrix<f64>; 4] {
    let n = m.nrows() / 2;
    [
        m.view((0, 0), (n, n)).into_owned(),
        m.view((0, n), (n, n)).into_owned(),
        m.view((n, 0), (n, n)).into_owned(),
        m.view((n, n), (n, n)).into_owned(),
    ]
}

/// Tangent map across one interface event, obtained by linearizing the
/// hit time together with the branch map.
pub fn jump_matrix(
    model: &PotentialModel,
    ev: &ReflectionEvent,
    region_in: Region,
    region_out: Region,
) -> DMatrix<f64> {
    let n = model.dimension;
    let itf = &model.interfaces[ev.hit.component];
    let y = &ev.hit.y;
    let gf = itf.grad_f(y);
    let gnorm = norm_sq(&gf).sqrt();
    let nhat: Vec<f64> = gf.iter().map(|g| g / gnorm).collect();
    let xi_in = &ev.hit.xi_in;
    let xi_out = &ev.xi_out;
    let grad_in = model.gradient_in(y, region_in);
    let grad_out = model.gradient_in(y, region_out);
    let mut f_in = DMatrix::zeros(2 * n, 1);
    let mut f_out = DMatrix::zeros(2 * n, 1);
    for i in 0..n {
        f_in[i] = 2.0 * xi_in[i];
        f_in[n + i] = -grad_in[i];
        f_out[i] = 2.0 * xi_out[i];
        f_out[n + i] = -grad_out[i];
    }
    // delta tau = c . delta z
    let rate = 2.0 * dot(&gf, xi_in);
    let mut c = DMatrix::zeros(1, 2 * n);
    for i in 0..n {
        c[i] = -gf[i] / rate;
    }
    let mut dg = DMatrix::<f64>::identity(2 * n, 2 * n);
    if ev.choice == BranchChoice::Reflect {
        let hf = DMatrix::from_row_slice(n, n, &itf.hess_f(y));
        let nv = DMatrix::from_column_slice(n, 1, &nhat);
        let proj = DMatrix::<f64>::identity(n, n) - &nv * nv.transpose();
        let dn = proj * hf / gnorm;
        let xv = DMatrix::from_column_slice(n, 1, xi_in);
        let xn = dot(xi_in, &nhat);
        let dxi_dx = (&nv * (dn.transpose() * &xv).transpose() + dn * xn) * -2.0;
        let refl = DMatrix::<f64>::identity(n, n) - &nv * nv.transpose() * 2.0;
        dg.view_mut((n, 0), (n, n)).copy_from(&dxi_dx);
        dg.view_mut((n, n), (n, n)).copy_from(&refl);
    }
    let id = DMatrix::<f64>::identity(2 * n, 2 * n);
    &dg * (id + &f_in * &c) - &f_out * &c
}

fn variational_rhs<'a>(
    model: &'a PotentialModel,
    region: Region,
) -> impl FnMut(f64, &[f64], &mut [f64]) + 'a {
    let n = model.dimension;
    let m = 2 * n;
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    move |_t, y, dy| {
        model.derivatives_in(&y[..n], region, &mut grad, Some(&mut hess));
        for i in 0..n {
            dy[i] = 2.0 * y[n + i];
            dy[n + i] = -grad[i];
        }
        let yy = &y[m..];
        let d = &mut dy[m..];
        for j in 0..m {
            for i in 0..n {
                d[i * m + j] = 2.0 * yy[(n + i) * m + j];
                let mut s = 0.0;
                for k in 0..n {
                    s += hess[i * n + k] * yy[k * m + j];
                }
                d[(n + i) * m + j] = -s;
            }
        }
    }
}

/// Integrates the variational equations along `tr`, applying the event jump
/// matrices at each reflection or transmission.
pub fn integrate_monodromy(
    model: &PotentialModel,
    tr: &BranchingTrajectory,
    cfg: &FlowConfig,
) -> Result<Monodromy> {
    if let Some(&t) = tr.glancing.first() {
        return Err(Error::GlancingEvent { t });
    }
    let n = model.dimension;
    let m = 2 * n;
    let mut ymat = DMatrix::<f64>::identity(m, m);
    let mut pieces = Vec::new();
    let mut jumps = Vec::new();
    let mut reflections = 0usize;
    let opts = cfg.ode_options();
    for (k, seg) in tr.segments.iter().enumerate() {
        let mut state = seg.dense.eval(seg.t0);
        if k == 0 {
            state = tr.initial.to_state();
        } else {
            let ev = &tr.events[k - 1];
            // restart exactly from the branched state
            state[..n].copy_from_slice(&ev.hit.y);
            state[n..m].copy_from_slice(&ev.xi_out);
        }
        state.extend(ymat.transpose().iter());
        let out = ode::integrate(
            variational_rhs(model, seg.region),
            seg.t0,
            &state,
            seg.t1,
            &opts,
            None,
        )?;
        ymat = DMatrix::from_row_slice(m, m, &out.y[m..]);
        pieces.push(Piece {
            t0: seg.t0,
            t1: seg.t1,
            reflections_before: reflections,
            dense: out.dense,
        });
        if let Some(ev) = tr.events.get(k) {
            let region_out = tr.segments.get(k + 1).map_or(tr.final_region, |s| s.region);
            let jm = jump_matrix(model, ev, seg.region, region_out);
            ymat = &jm * ymat;
            jumps.push((ev.hit.t, jm));
            if ev.choice == BranchChoice::Reflect {
                reflections += 1;
            }
        }
    }
    Ok(Monodromy {
        n,
        matrix: ymat,
        jumps,
        pieces,
    })
}

/// `S = int |xdot|^2/4 - V dt` over the trajectory.
pub fn action(model: &PotentialModel, tr: &BranchingTrajectory) -> f64 {
    let n = tr.dimension();
    tr.segments
        .iter()
        .map(|s| {
            ode::quadrature(&s.dense, |y| {
                norm_sq(&y[n..2 * n]) - model.value_in(&y[..n], s.region)
            })
        })
        .sum()
}

/// Second derivatives of the two-point action `S(T, x, y)` (trajectory from
/// `y` to `x`) together with the matrices `A`, `B`, `C`.
#[derive(Clone, Debug, Serialize)]
pub struct HessianBlocks {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub s_xx: DMatrix<f64>,
    pub s_xy: DMatrix<f64>,
    pub s_yx: DMatrix<f64>,
    pub s_yy: DMatrix<f64>,
}

pub fn action_hessian_blocks(m: &DMatrix<f64>) -> Result<HessianBlocks> {
    let n = m.nrows() / 2;
    let [xy, xe, ky, ke] = blocks(m);
    let det = xe.determinant();
    let scale = xe.amax().max(1e-300).powi(n as i32);
    if det.abs() < 1e-10 * scale.max(1.0) {
        return Err(Error::ConjugateEndpoint { det });
    }
    let inv = xe
        .clone()
        .try_inverse()
        .ok_or(Error::ConjugateEndpoint { det })?;
    let id = DMatrix::<f64>::identity(n, n);
    let a = &ky - (&id - &ke) * &inv * (&id - &xy);
    let b = -&inv * (&id - &xy) - (&id - &ke) * &inv;
    let c = -inv.clone();
    Ok(HessianBlocks {
        s_xx: &ke * &inv,
        s_xy: &ky - &ke * &inv * &xy,
        s_yx: c.clone(),
        s_yy: &inv * &xy,
        a,
        b,
        c,
    })
}

/// Orthonormal frame with first vector along `v`.
pub fn fermi_frame(v: &[f64]) -> DMatrix<f64> {
    let n = v.len();
    let norm = norm_sq(v).sqrt();
    let e1: Vec<f64> = v.iter().map(|c| c / norm).collect();
    match n {
        1 => DMatrix::from_element(1, 1, e1[0].signum()),
        _ => DMatrix::from_column_slice(2, 2, &[e1[0], e1[1], -e1[1], e1[0]]),
    }
}

/// Tangent map expressed in the frame aligned with the velocity `v`.
pub fn rotate_to_frame(m: &DMatrix<f64>, v: &[f64]) -> DMatrix<f64> {
    let n = v.len();
    let q = fermi_frame(v);
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&q);
    big.view_mut((n, n), (n, n)).copy_from(&q);
    big.transpose() * m * big
}

/// Characteristic polynomial coefficients `c[k]` of `det(lambda - M)`
/// (Faddeev–LeVerrier).
pub fn char_poly(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut c = vec![0.0; d + 1];
    c[d] = 1.0;
    let id = DMatrix::<f64>::identity(d, d);
    let mut mk = DMatrix::<f64>::zeros(d, d);
    for k in 1..=d {
        mk = m * (&mk + &id * c[d + 1 - k]);
        c[d - k] = -mk.trace() / k as f64;
    }
    c
}

#[derive(Clone, Debug, Serialize)]
pub struct PoincareDet {
    /// `q(1)` from `det(lambda - M) = (lambda - 1)^2 q(lambda)`.
    pub route_poly: f64,
    /// `det K / det C` in the velocity-aligned frame.
    pub route_hessian: Option<f64>,
    pub mismatch: Option<f64>,
    pub unit_multiplicity: usize,
    pub diagnostic: Option<String>,
}

pub fn unit_multiplicity(m: &DMatrix<f64>, tol: f64) -> usize {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .filter(|l| (**l - 1.0).norm() < tol)
        .count()
}

/// Both routes without the degeneracy gate.
pub fn poincare_routes(m: &DMatrix<f64>, velocity: &[f64]) -> (f64, Option<f64>) {
    let c = char_poly(m);
    let q1: f64 = c
        .iter()
        .enumerate()
        .map(|(k, ck)| ck * (k * k.saturating_sub(1)) as f64 / 2.0)
        .sum();
    let rot = rotate_to_frame(m, velocity);
    let route2 = action_hessian_blocks(&rot).ok().map(|hb| {
        let k = fermi_k(&hb);
        k.determinant() / hb.c.determinant()
    });
    (q1, route2)
}

/// `[[C11, B1j], [Bj1, A_jk]]`
pub fn fermi_k(hb: &HessianBlocks) -> DMatrix<f64> {
    let mut k = hb.a.clone();
    let n = k.nrows();
    k[(0, 0)] = hb.c[(0, 0)];
    for j in 1..n {
        k[(0, j)] = hb.b[(0, j)];
        k[(j, 0)] = hb.b[(j, 0)];
    }
    k
}

pub fn poincare_det(m: &DMatrix<f64>, velocity: &[f64], unit_tol: f64) -> Result<PoincareDet> {
    let mult = unit_multiplicity(m, unit_tol);
    if mult > 2 {
        return Err(Error::DegenerateOrbit { multiplicity: mult });
    }
    let (r1, r2) = poincare_routes(m, velocity);
    let mismatch = r2.map(|v| (v - r1).abs() / r1.abs().max(v.abs()).max(1e-300));
    let diagnostic = match mismatch {
        Some(x) if x > 1e-5 => Some(format!(
            "Poincaré routes disagree: {r1:e} vs {:e}",
            r2.unwrap()
        )),
        None => Some("endpoint conjugate: Hessian route unavailable".to_string()),
        _ => None,
    };
    Ok(PoincareDet {
        route_poly: r1,
        route_hessian: r2,
        mismatch,
        unit_multiplicity: mult,
        diagnostic,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugatePoint {
    pub t: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugateInfo {
    pub count: usize,
    pub points: Vec<ConjugatePoint>,
    pub endpoint_conjugate: bool,
    /// `det X_eta(T)` at the final time.
    pub endpoint_det: f64,
}

fn eta_block(mono: &Monodromy, t: f64) -> DMatrix<f64> {
    let n = mono.n;
    mono.at(t).view((0, n), (n, n)).into_owned()
}

/// Zeros of `det d_eta X(t)` on `(0, T)`, each with the multiplicity of
/// the rank drop. Touching zeros are rejected.
pub fn conjugate_points(mono: &Monodromy) -> Result<ConjugateInfo> {
    let info = scan_conjugate(mono)?;
    if info.endpoint_conjugate {
        return Err(Error::ConjugateEndpoint {
            det: info.endpoint_det,
        });
    }
    Ok(info)
}

pub(crate) fn scan_conjugate(mono: &Monodromy) -> Result<ConjugateInfo> {
    let n = mono.n;
    let t_end = mono.pieces.last().map_or(0.0, |p| p.t1);
    let t_start = mono.pieces.first().map_or(0.0, |p| p.t0);
    let span = t_end - t_start;
    // signed determinant continuous across reflections (the position part
    // of every reflection jump has determinant -1)
    let signed = |piece: &Piece, t: f64| -> (f64, f64) {
        let y = piece.dense.eval(t);
        let m = 2 * n;
        let full = DMatrix::from_row_slice(m, m, &y[m..m + m * m]);
        let xe = full.view((0, n), (n, n)).into_owned();
        let sv = xe.clone().svd(false, false).singular_values;
        let sgn = if piece.reflections_before % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        (sgn * xe.determinant(), sv.min())
    };
    let mut scale: f64 = 0.0;
    let mut samples: Vec<Vec<(f64, f64, f64)>> = Vec::new();
    for p in &mono.pieces {
        let len = p.t1 - p.t0;
        let k = ((600.0 * len / span).ceil() as usize).max(16);
        let mut row = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let t = p.t0 + len * j as f64 / k as f64;
            if t <= t_start + 1e-9 * span.max(1.0) {
                continue;
            }
            let (d, smin) = signed(p, t);
            let xe = eta_block(mono, t);
            scale = scale.max(xe.amax());
            row.push((t, d, smin));
        }
        samples.push(row);
    }
    let thr = 1e-6 * scale.max(1e-300);
    let xe_end = eta_block(mono, t_end);
    let endpoint_det = xe_end.determinant();
    let endpoint_conjugate = xe_end.svd(false, false).singular_values.min() < thr;
    let mut points = Vec::new();
    for (p, row) in mono.pieces.iter().zip(&samples) {
        for w in row.windows(2) {
            let (ta, da, _) = w[0];
            let (tb, db, _) = w[1];
            // a zero at the endpoint itself is not interior; otherwise the
            // last window can hold a genuine conjugate point
            if endpoint_conjugate && tb >= t_end - 1e-9 * span {
                continue;
            }
            if da == 0.0 || da.signum() != db.signum() {
                let (mut lo, mut hi) = (ta, tb);
                let slo = da.signum();
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if signed(p, mid).0.signum() == slo {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let t = 0.5 * (lo + hi);
                let sv = eta_block(mono, t).svd(false, false).singular_values;
                let mult = sv.iter().filter(|s| **s < thr).count().max(1);
                points.push(ConjugatePoint {
                    t,
                    multiplicity: mult,
                });
            }
        }
        // touching zeros: interior minima of the smallest singular value
        for w in row.windows(3) {
            let (ta, da, sa) = w[0];
            let (tb, _, sb) = w[1];
            let (tc, dc, sc) = w[2];
            if sb < sa && sb < sc && da.signum() == dc.signum() && tc < t_end - 1e-9 * span {
                let (mut lo, mut hi) = (ta, tc);
                let gr = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..100 {
                    let m1 = hi - gr * (hi - lo);
                    let m2 = lo + gr * (hi - lo);
                    if signed(p, m1).1 < signed(p, m2).1 {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                let t = 0.5 * (lo + hi);
                if signed(p, t).1 < thr {
                    return Err(Error::TangentialConjugate { t });
                }
                let _ = tb;
            }
        }
    }
    Ok(ConjugateInfo {
        count: points.iter().map(|p| p.multiplicity).sum(),
        points,
        endpoint_conjugate,
        endpoint_det,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MorseIndex {
    pub sigma: usize,
    pub hessian_index: usize,
    pub mu: usize,
    /// Hessian of `S(t, x, x)` in `(t, transverse x)`.
    pub hessian: DMatrix<f64>,
}

/// Hessian of `(t, x_hat) -> S(t, x, x)` at a closed orbit, from the
/// velocity-aligned blocks.
pub fn spacetime_hessian(m: &DMatrix<f64>, velocity: &[f64]) -> Result<DMatrix<f64>> {
    let hb = action_hessian_blocks(&rotate_to_frame(m, velocity))?;
    let n = velocity.len();
    let vdot = norm_sq(velocity).sqrt();
    let mut h = hb.a.clone();
    h[(0, 0)] = -vdot * vdot * hb.c[(0, 0)];
    for j in 1..n {
        h[(0, j)] = vdot * hb.b[(0, j)];
        h[(j, 0)] = vdot * hb.b[(0, j)];
    }
    Ok(h)
}

pub fn negative_index(h: &DMatrix<f64>) -> Result<usize> {
    let ev = h.clone().symmetric_eigen().eigenvalues;
    let scale = ev.amax().max(1e-300);
    if ev.iter().any(|l| l.abs() < 1e-10 * scale) {
        return Err(Error::DegenerateOrbit { multiplicity: 3 });
    }
    Ok(ev.iter().filter(|l| **l < 0.0).count())
}

/// `sigma = ind(Hessian of S(t, x, x)) + number of conjugate points`.
pub fn morse_index(mono: &Monodromy, velocity: &[f64]) -> Result<MorseIndex> {
    let info = scan_conjugate(mono)?;
    if info.endpoint_conjugate {
        return Err(Error::SelfConjugate);
    }
    let hessian = spacetime_hessian(&mono.matrix, velocity)?;
    let hessian_index = negative_index(&hessian)?;
    Ok(MorseIndex {
        sigma: hessian_index + info.count,
        hessian_index,
        mu: info.count,
        hessian,
    })
}

/// Relative residual of
/// `|det S1_xy| |det S2_yz| = |det d2_yy (S1 + S2)| |det S~_xz|`,
/// with the segments' Hessian blocks and the composite's.
pub fn van_vleck_compose_check(
    first: &HessianBlocks,
    second: &HessianBlocks,
    composite: &HessianBlocks,
) -> Result<f64> {
    let lhs = first.s_yx.determinant().abs() * second.s_yx.determinant().abs();
    let hyy = &first.s_xx + &second.s_yy;
    let dyy = hyy.determinant();
    let scale = hyy.amax().powi(hyy.nrows() as i32);
    if dyy.abs() < 1e-12 * scale.max(1e-300) {
        return Err(Error::DegenerateStationaryPoint);
    }
    let rhs = dyy.abs() * composite.s_yx.determinant().abs();
    Ok((lhs - rhs).abs() / lhs.max(rhs))
}

/// Composition residual for `tr` cut at time `t1`: both pieces and the whole
/// are re-flowed from their own initial points with their own event words.
pub fn van_vleck_split(
    model: &PotentialModel,
    tr: &BranchingTrajectory,
    t1: f64,
    cfg: &FlowConfig,
) -> Result<f64> {
    let word: Vec<BranchChoice> = tr.events.iter().map(|e| e.choice).collect();
    // a cut on an event belongs to the piece before it: move it just past
    // the event so that the first piece realizes the branch
    let guard = 10.0 * cfg.eps_t;
    let t1 = match tr.events.iter().find(|e| (e.t() - t1).abs() <= guard) {
        Some(e) => e.t() + guard,
        None => t1,
    };
    let before = tr.events.iter().filter(|e| e.t() <= t1).count();
    let first = flow_with_itinerary(model, &tr.initial, &word[..before], t1, cfg)?;
    let second = flow_with_itinerary(model, &first.final_point, &word[before..], tr.total_time - t1, cfg)?;
    let blocks_of = |t: &BranchingTrajectory| -> Result<HessianBlocks> {
        action_hessian_blocks(&integrate_monodromy(model, t, cfg)?.matrix)
    };
    van_vleck_compose_check(&blocks_of(&first)?, &blocks_of(&second)?, &blocks_of(tr)?)
}

/// Two-point action between `start` and `end` in time `t` along the given
/// itinerary, solved by Newton shooting on the initial momentum.
pub fn two_point_action(
    model: &PotentialModel,
    start: &[f64],
    end: &[f64],
    t: f64,
    itinerary: &[BranchChoice],
    eta_guess: &[f64],
    cfg: &FlowConfig,
) -> Result<(f64, Vec<f64>, BranchingTrajectory)> {
    let n = model.dimension;
    let mut eta = eta_guess.to_vec();
    for _ in 0..60 {
        let p0 = PhasePoint::new(start.to_vec(), eta.clone());
        let tr = flow_with_itinerary(model, &p0, itinerary, t, cfg)?;
        let res: Vec<f64> = (0..n).map(|i| tr.final_point.x[i] - end[i]).collect();
        let rn = norm_sq(&res).sqrt();
        if rn < 1e-13 * (1.0 + norm_sq(end).sqrt()) {
            let s = action(model, &tr);
            return Ok((s, eta, tr));
        }
        let mono = integrate_monodromy(model, &tr, cfg)?;
        let xe = blocks(&mono.matrix)[1].clone();
        let step = xe
            .lu()
            .solve(&DMatrix::from_column_slice(n, 1, &res))
            .ok_or(Error::DegenerateJacobian)?;
        for i in 0..n {
            eta[i] -= step[i];
        }
    }
    Err(Error::NoConvergence { residual: f64::NAN })
}
