#![allow(dead_code)]

//! Brute-force oracles shared by the integration and acceptance tests. They
//! use none of the crate's variational machinery.

use conormal_trace::branchflow::{flow_with_itinerary, BranchChoice, FlowConfig, PhasePoint};
use conormal_trace::orbits::ClosedOrbit;
use conormal_trace::potential::{builtin, ModelParams, PotentialModel};
use conormal_trace::Result;
use nalgebra::{DMatrix, DVector};

pub fn model(name: &str) -> PotentialModel {
    let mut p = ModelParams::default();
    if name.ends_with("2d") {
        p.dimension = 2;
    }
    builtin(name, &p).unwrap()
}

pub fn model_2d(name: &str) -> PotentialModel {
    builtin(name, &ModelParams { dimension: 2, ..ModelParams::default() }).unwrap()
}

/// Central finite-difference Jacobian of the endpoint map `p0 -> p(t)` with
/// the branch word held fixed.
pub fn fd_monodromy(
    model: &PotentialModel,
    p0: &PhasePoint,
    word: &[BranchChoice],
    t: f64,
    cfg: &FlowConfig,
    delta: f64,
) -> Result<DMatrix<f64>> {
    let s0 = p0.to_state();
    let m = s0.len();
    let n = m / 2;
    let mut jac = DMatrix::zeros(m, m);
    for j in 0..m {
        let end = |sign: f64| -> Result<Vec<f64>> {
            let mut s = s0.clone();
            s[j] += sign * delta;
            let tr = flow_with_itinerary(model, &PhasePoint::from_state(&s, n), word, t, cfg)?;
            Ok(tr.final_point.to_state())
        };
        let (a, b) = (end(1.0)?, end(-1.0)?);
        for i in 0..m {
            jac[(i, j)] = (a[i] - b[i]) / (2.0 * delta);
        }
    }
    Ok(jac)
}

/// Position of a pinned point of the broken loop as a function of at most
/// one free parameter.
#[derive(Clone, Debug)]
enum Pin {
    Fixed(Vec<f64>),
    /// Slides along the interface component through `origin`.
    OnInterface { component: usize, origin: Vec<f64>, tangent: Vec<f64> },
    /// Moves along a fixed line through `origin`.
    Line { origin: Vec<f64>, direction: Vec<f64> },
}

impl Pin {
    fn params(&self) -> usize {
        match self {
            Pin::Fixed(_) => 0,
            _ => 1,
        }
    }

    fn at(&self, model: &PotentialModel, s: f64) -> Vec<f64> {
        match self {
            Pin::Fixed(x) => x.clone(),
            Pin::Line { origin, direction } => origin.iter().zip(direction).map(|(o, d)| o + s * d).collect(),
            Pin::OnInterface { component, origin, tangent } => {
                let iface = &model.interfaces[*component];
                let mut x: Vec<f64> = origin.iter().zip(tangent).map(|(o, d)| o + s * d).collect();
                for _ in 0..50 {
                    let f = iface.f(&x);
                    if f.abs() < 1e-15 {
                        break;
                    }
                    let g = iface.grad_f(&x);
                    let g2: f64 = g.iter().map(|a| a * a).sum();
                    for (xi, gi) in x.iter_mut().zip(&g) {
                        *xi -= f * gi / g2;
                    }
                }
                x
            }
        }
    }
}

/// Discretization of `J[a] = ∫ |a'|^2/4 - V(a) + E dt` over closed loops of
/// free period whose reflections are corners on the interface. Each arc
/// between consecutive corners has its own duration; the trapezoid rule is
/// used for the potential.
pub struct BrokenLoop<'a> {
    model: &'a PotentialModel,
    energy: f64,
    n: usize,
    pins: Vec<Pin>,
    /// Interior node count of the arc leaving each pin.
    nodes: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct LoopIndex {
    /// Negative eigenvalues of the discrete second variation.
    pub index: usize,
    /// Smallest eigenvalue modulus, to see how far the count is from a
    /// degeneracy.
    pub min_abs_eigenvalue: f64,
    pub residual: f64,
    pub variables: usize,
}

impl<'a> BrokenLoop<'a> {
    fn unknowns(&self) -> usize {
        self.n * self.nodes.iter().sum::<usize>() + self.pins.iter().map(Pin::params).sum::<usize>() + self.pins.len()
    }

    /// Splits `z` into arcs of points (pins included at both ends) and
    /// durations.
    fn unpack(&self, z: &[f64]) -> (Vec<Vec<Vec<f64>>>, Vec<f64>) {
        let n = self.n;
        let mut k = 0;
        let mut interior = Vec::new();
        for &m in &self.nodes {
            let mut arc = Vec::with_capacity(m);
            for _ in 0..m {
                arc.push(z[k..k + n].to_vec());
                k += n;
            }
            interior.push(arc);
        }
        let mut pin_pos = Vec::new();
        for p in &self.pins {
            let s = if p.params() == 1 {
                k += 1;
                z[k - 1]
            } else {
                0.0
            };
            pin_pos.push(p.at(self.model, s));
        }
        let taus = z[k..k + self.pins.len()].to_vec();
        let arcs = interior
            .into_iter()
            .enumerate()
            .map(|(j, inner)| {
                let mut pts = vec![pin_pos[j].clone()];
                pts.extend(inner);
                pts.push(pin_pos[(j + 1) % self.pins.len()].clone());
                pts
            })
            .collect();
        (arcs, taus)
    }

    fn potential(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let r = self.model.region_of(x);
        (self.model.value_in(x, r), self.model.gradient_in(x, r))
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        let (arcs, taus) = self.unpack(z);
        let mut j = 0.0;
        for (pts, tau) in arcs.iter().zip(&taus) {
            let dt = tau / (pts.len() - 1) as f64;
            for w in pts.windows(2) {
                let d2: f64 = w[1].iter().zip(&w[0]).map(|(b, a)| (b - a).powi(2)).sum();
                j += d2 / (4.0 * dt) - dt * 0.5 * (self.potential(&w[0]).0 + self.potential(&w[1]).0) + self.energy * dt;
            }
        }
        j
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let (arcs, taus) = self.unpack(z);
        let k_pins = self.pins.len();
        let mut g = vec![0.0; z.len()];
        let mut pin_grad = vec![vec![0.0; n]; k_pins];
        let mut offset = 0;
        let mut dtau = vec![0.0; k_pins];
        for (j, (pts, tau)) in arcs.iter().zip(&taus).enumerate() {
            let links = pts.len() - 1;
            let dt = tau / links as f64;
            let mut grad_pts = vec![vec![0.0; n]; pts.len()];
            let mut d_dt = 0.0;
            for i in 0..links {
                let (a, b) = (&pts[i], &pts[i + 1]);
                let (va, ga) = self.potential(a);
                let (vb, gb) = self.potential(b);
                let mut d2 = 0.0;
                for c in 0..n {
                    let d = b[c] - a[c];
                    d2 += d * d;
                    grad_pts[i][c] += -d / (2.0 * dt) - 0.5 * dt * ga[c];
                    grad_pts[i + 1][c] += d / (2.0 * dt) - 0.5 * dt * gb[c];
                }
                d_dt += -d2 / (4.0 * dt * dt) - 0.5 * (va + vb) + self.energy;
            }
            dtau[j] = d_dt / links as f64;
            for (i, gp) in grad_pts[1..links].iter().enumerate() {
                g[offset + i * n..offset + (i + 1) * n].copy_from_slice(gp);
            }
            offset += (links - 1) * n;
            for c in 0..n {
                pin_grad[j][c] += grad_pts[0][c];
                pin_grad[(j + 1) % k_pins][c] += grad_pts[links][c];
            }
        }
        let mut k = offset;
        for (p, pg) in self.pins.iter().zip(&pin_grad) {
            if p.params() == 1 {
                let s = z[k];
                let h = 1e-6;
                let (a, b) = (p.at(self.model, s + h), p.at(self.model, s - h));
                g[k] = (0..n).map(|c| pg[c] * (a[c] - b[c]) / (2.0 * h)).sum();
                k += 1;
            }
        }
        g[k..k + k_pins].copy_from_slice(&dtau);
        g
    }

    pub fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let m = z.len();
        let h = 1e-5;
        let mut hess = DMatrix::zeros(m, m);
        let mut w = z.to_vec();
        for j in 0..m {
            w[j] = z[j] + h;
            let a = self.gradient(&w);
            w[j] = z[j] - h;
            let b = self.gradient(&w);
            w[j] = z[j];
            for i in 0..m {
                hess[(i, j)] = (a[i] - b[i]) / (2.0 * h);
            }
        }
        (&hess + hess.transpose()) * 0.5
    }

    /// Newton to the discrete stationary loop near `z`, then the inertia
    /// of the Hessian there.
    pub fn index_near(&self, mut z: Vec<f64>) -> LoopIndex {
        let mut residual = f64::INFINITY;
        for _ in 0..30 {
            let g = DVector::from_vec(self.gradient(&z));
            residual = g.amax();
            if residual < 1e-11 {
                break;
            }
            let step = self.hessian(&z).lu().solve(&(-g)).expect("nonsingular discrete Hessian");
            for (zi, s) in z.iter_mut().zip(step.iter()) {
                *zi += s;
            }
        }
        let ev = self.hessian(&z).symmetric_eigen().eigenvalues;
        LoopIndex {
            index: ev.iter().filter(|l| **l < 0.0).count(),
            min_abs_eigenvalue: ev.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min),
            residual,
            variables: z.len(),
        }
    }
}

/// Index of the discrete periodic second variation at `orbit`, with about
/// `total_nodes` nodes along the loop.
pub fn loop_index(model: &PotentialModel, orbit: &ClosedOrbit, total_nodes: usize) -> LoopIndex {
    let tr = &orbit.trajectory;
    let n = model.dimension;
    let period = orbit.period;
    let wrap = |t: f64| tr.state_at(t.rem_euclid(period).min(period));
    let reflections: Vec<_> = tr
        .events
        .iter()
        .filter(|e| e.choice == BranchChoice::Reflect && e.t() < period - 1e-9)
        .collect();
    let (pins, starts): (Vec<Pin>, Vec<f64>) = if reflections.is_empty() {
        // anchor where the speed is largest so the transverse pin removes
        // the time-translation mode
        let t_star = (0..2000)
            .map(|i| period * i as f64 / 2000.0)
            .max_by(|a, b| {
                let s = |t: f64| wrap(t).xi.iter().map(|v| v * v).sum::<f64>();
                s(*a).total_cmp(&s(*b))
            })
            .unwrap();
        let p = wrap(t_star);
        let pin = if n == 1 {
            Pin::Fixed(p.x.clone())
        } else {
            let norm = p.xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            Pin::Line { origin: p.x.clone(), direction: vec![-p.xi[1] / norm, p.xi[0] / norm] }
        };
        (vec![pin], vec![t_star])
    } else {
        reflections
            .iter()
            .map(|e| {
                let pin = if n == 1 {
                    Pin::Fixed(e.hit.y.clone())
                } else {
                    let nu = &e.hit.normal;
                    Pin::OnInterface { component: e.hit.component, origin: e.hit.y.clone(), tangent: vec![-nu[1], nu[0]] }
                };
                (pin, e.t())
            })
            .unzip()
    };
    let k = pins.len();
    let taus: Vec<f64> = (0..k)
        .map(|j| if k == 1 { period } else { (starts[(j + 1) % k] - starts[j]).rem_euclid(period) })
        .collect();
    let nodes: Vec<usize> = taus
        .iter()
        .map(|tau| ((total_nodes as f64 * tau / period).round() as usize).max(8))
        .collect();
    let mut z = Vec::new();
    for j in 0..k {
        let links = nodes[j] + 1;
        for i in 1..links {
            z.extend(wrap(starts[j] + taus[j] * i as f64 / links as f64).x);
        }
    }
    for p in &pins {
        if p.params() == 1 {
            z.push(0.0);
        }
    }
    z.extend(&taus);
    let lp = BrokenLoop { model, energy: orbit.energy, n, pins, nodes };
    debug_assert_eq!(z.len(), lp.unknowns());
    lp.index_near(z)
}
