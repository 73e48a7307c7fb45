//! Hamiltonian flow of `p = |xi|^2 + V` with interface events and the
//! reflect/transmit branching law.

use crate::error::{Error, Result};
use crate::ode::{self, DenseSolution, Events, Stop};
use crate::potential::{PotentialModel, Region};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::Write;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Self {
        PhasePoint { x, xi }
    }

    pub fn energy(&self, model: &PotentialModel) -> f64 {
        norm_sq(&self.xi) + model.eval_potential(&self.x)
    }

    pub fn to_state(&self) -> Vec<f64> {
        let mut s = self.x.clone();
        s.extend_from_slice(&self.xi);
        s
    }

    pub fn from_state(s: &[f64], n: usize) -> Self {
        PhasePoint {
            x: s[..n].to_vec(),
            xi: s[n..2 * n].to_vec(),
        }
    }
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BranchChoice {
    Reflect,
    Transmit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HitClass {
    Hyperbolic,
    Glancing,
}

/// A transversal (or glancing) crossing of one interface component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitRecord {
    pub t: f64,
    pub y: Vec<f64>,
    pub component: usize,
    /// Unit normal oriented along the direction of motion.
    pub normal: Vec<f64>,
    /// Normal momentum in that orientation, so `xi_n >= 0`.
    pub xi_n: f64,
    pub xi_tangential: Vec<f64>,
    pub xi_in: Vec<f64>,
    /// True when the incoming side is `{f >= 0}`.
    pub from_plus: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionEvent {
    pub hit: HitRecord,
    pub choice: BranchChoice,
    pub xi_out: Vec<f64>,
}

impl ReflectionEvent {
    pub fn t(&self) -> f64 {
        self.hit.t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub choices: Vec<BranchChoice>,
    pub max_reflections: usize,
}

impl Itinerary {
    pub fn new(choices: Vec<BranchChoice>) -> Self {
        let n = reflections(&choices);
        Itinerary {
            choices,
            max_reflections: n,
        }
    }

    pub fn reflections(&self) -> usize {
        reflections(&self.choices)
    }
}

pub fn reflections(choices: &[BranchChoice]) -> usize {
    choices
        .iter()
        .filter(|c| **c == BranchChoice::Reflect)
        .count()
}

#[derive(Clone, Debug)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub region: Region,
    pub dense: DenseSolution,
}

#[derive(Clone, Debug)]
pub struct BranchingTrajectory {
    pub initial: PhasePoint,
    pub total_time: f64,
    pub energy: f64,
    pub segments: Vec<Segment>,
    pub events: Vec<ReflectionEvent>,
    /// Times of glancing crossings that were continued unbroken.
    pub glancing: Vec<f64>,
    pub final_point: PhasePoint,
    pub final_region: Region,
}

impl BranchingTrajectory {
    pub fn dimension(&self) -> usize {
        self.initial.x.len()
    }

    pub fn itinerary(&self) -> Vec<BranchChoice> {
        self.events.iter().map(|e| e.choice).collect()
    }

    pub fn reflection_count(&self) -> usize {
        reflections(&self.itinerary())
    }

    /// State at time `t`, taken from the segment containing `t`.
    pub fn state_at(&self, t: f64) -> PhasePoint {
        let n = self.dimension();
        let idx = self
            .segments
            .partition_point(|s| s.t1 < t)
            .min(self.segments.len() - 1);
        PhasePoint::from_state(&self.segments[idx].dense.eval(t), n)
    }

    /// Smallest incident normal momentum over all hits, glancing included.
    pub fn min_normal_momentum(&self) -> f64 {
        self.events
            .iter()
            .map(|e| e.hit.xi_n)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_energy_drift(&self, model: &PotentialModel) -> f64 {
        let n = self.dimension();
        let mut worst: f64 = 0.0;
        for s in &self.segments {
            for st in &s.dense.steps {
                let p = PhasePoint::from_state(&st.rcont[..2 * n], n);
                let e = norm_sq(&p.xi) + model.value_in(&p.x, s.region);
                worst = worst.max((e - self.energy).abs());
            }
        }
        worst / self.energy.abs().max(1e-300)
    }

    /// Writes `t, x.., xi.., segment` rows sampled on each segment's mesh.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let n = self.dimension();
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..n).map(|i| format!("xi{i}")));
        header.push("segment".into());
        wr.write_record(&header)?;
        for (k, s) in self.segments.iter().enumerate() {
            for t in s.dense.mesh() {
                let y = s.dense.eval(t);
                let mut row = vec![format!("{t:.17e}")];
                row.extend(y.iter().map(|v| format!("{v:.17e}")));
                row.push(k.to_string());
                wr.write_record(&row)?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Tolerances shared by every flow operation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FlowConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Absolute glancing threshold; `None` means `1e-5 * sqrt(E)`.
    pub eps_g: Option<f64>,
    pub eps_t: f64,
    pub drift_tol: f64,
    pub branch_cap: usize,
    pub strict: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            rtol: 1e-12,
            atol: 1e-13,
            eps_g: None,
            eps_t: 1e-9,
            drift_tol: 1e-8,
            branch_cap: 4096,
            strict: false,
        }
    }
}

impl FlowConfig {
    pub fn glancing_threshold(&self, energy: f64) -> f64 {
        self.eps_g.unwrap_or(1e-5 * energy.abs().sqrt())
    }

    pub fn ode_options(&self) -> ode::Options {
        ode::Options {
            rtol: self.rtol,
            atol: self.atol,
            ..ode::Options::default()
        }
    }
}

/// Region a point departs into: the side of each interface it sits on, or,
/// for interfaces it sits on, the side its velocity points into.
pub fn departure_region(model: &PotentialModel, p: &PhasePoint) -> Region {
    let mut r = model.region_of(&p.x);
    for (i, itf) in model.interfaces.iter().enumerate() {
        let f = itf.f(&p.x);
        if f.abs() < 1e-9 {
            let rate = dot(&itf.grad_f(&p.x), &p.xi);
            if rate != 0.0 {
                r = r.with_side(i, rate > 0.0);
            }
        }
    }
    r
}

pub(crate) fn hamilton_rhs<'a>(
    model: &'a PotentialModel,
    region: Region,
) -> impl FnMut(f64, &[f64], &mut [f64]) + 'a {
    let n = model.dimension;
    let mut grad = vec![0.0; n];
    move |_t, y, dy| {
        model.derivatives_in(&y[..n], region, &mut grad, None);
        for i in 0..n {
            dy[i] = 2.0 * y[n + i];
            dy[n + i] = -grad[i];
        }
    }
}

pub(crate) fn hit_record(
    model: &PotentialModel,
    component: usize,
    t: f64,
    p: &PhasePoint,
    region: Region,
) -> HitRecord {
    let itf = &model.interfaces[component];
    let nhat = itf.unit_normal(&p.x);
    let raw = dot(&nhat, &p.xi);
    let s = if raw >= 0.0 { 1.0 } else { -1.0 };
    let normal: Vec<f64> = nhat.iter().map(|c| s * c).collect();
    let xi_n = raw.abs();
    let xi_tangential =
        p.xi.iter()
            .zip(&normal)
            .map(|(x, m)| x - xi_n * m)
            .collect();
    HitRecord {
        t,
        y: p.x.clone(),
        component,
        normal,
        xi_n,
        xi_tangential,
        xi_in: p.xi.clone(),
        from_plus: region.is_plus(component),
    }
}

/// Integrates one smooth segment in the region fixed at departure, stopping
/// at the first interface crossing.
pub fn flow_segment(
    model: &PotentialModel,
    p0: &PhasePoint,
    t_max: f64,
    cfg: &FlowConfig,
) -> Result<(Segment, Option<HitRecord>)> {
    flow_segment_in(model, p0, departure_region(model, p0), 0.0, t_max, cfg)
}

pub fn flow_segment_in(
    model: &PotentialModel,
    p0: &PhasePoint,
    region: Region,
    t0: f64,
    t_max: f64,
    cfg: &FlowConfig,
) -> Result<(Segment, Option<HitRecord>)> {
    let n = model.dimension;
    let e0 = norm_sq(&p0.xi) + model.value_in(&p0.x, region);
    let expected: Vec<f64> = (0..model.interfaces.len())
        .map(|i| if region.is_plus(i) { 1.0 } else { -1.0 })
        .collect();
    let ev_fn = |y: &[f64], g: &mut [f64]| {
        for (i, itf) in model.interfaces.iter().enumerate() {
            g[i] = itf.f(&y[..n]);
        }
    };
    let events = Events {
        eval: &ev_fn,
        expected,
        separation: cfg.eps_t,
    };
    let out = ode::integrate(
        hamilton_rhs(model, region),
        t0,
        &p0.to_state(),
        t0 + t_max,
        &cfg.ode_options(),
        if model.interfaces.is_empty() {
            None
        } else {
            Some(&events)
        },
    )?;
    let p1 = PhasePoint::from_state(&out.y, n);
    let e1 = norm_sq(&p1.xi) + model.value_in(&p1.x, region);
    let drift = (e1 - e0).abs() / e0.abs().max(1e-8);
    if drift > cfg.drift_tol {
        return Err(Error::EnergyDriftExceeded { drift });
    }
    let seg = Segment {
        t0,
        t1: out.t,
        region,
        dense: out.dense,
    };
    let hit = match out.stop {
        Stop::Reached => None,
        Stop::Event { index } => Some(hit_record(model, index, out.t, &p1, region)),
    };
    Ok((seg, hit))
}

pub fn classify_hit(hit: &HitRecord, eps_g: f64) -> HitClass {
    if hit.xi_n.abs() > eps_g {
        HitClass::Hyperbolic
    } else {
        HitClass::Glancing
    }
}

/// Specular reflection `xi - 2 xi_N n` or identity.
pub fn apply_branch(hit: &HitRecord, choice: BranchChoice, eps_g: f64) -> Result<PhasePoint> {
    match choice {
        BranchChoice::Transmit => Ok(PhasePoint::new(hit.y.clone(), hit.xi_in.clone())),
        BranchChoice::Reflect => {
            if hit.xi_n.abs() <= eps_g {
                return Err(Error::GlancingBranch { xi_n: hit.xi_n });
            }
            let xi_n = dot(&hit.xi_in, &hit.normal);
            let xi = hit
                .xi_in
                .iter()
                .zip(&hit.normal)
                .map(|(x, m)| x - 2.0 * xi_n * m)
                .collect();
            Ok(PhasePoint::new(hit.y.clone(), xi))
        }
    }
}

fn next_region(region: Region, hit: &HitRecord, choice: BranchChoice) -> Region {
    match choice {
        BranchChoice::Reflect => region,
        BranchChoice::Transmit => region.with_side(hit.component, !hit.from_plus),
    }
}

/// Flows for time `t_total`, realizing exactly the given branch choices at
/// the successive hyperbolic hits. Glancing hits are crossed unbroken.
pub fn flow_with_itinerary(
    model: &PotentialModel,
    p0: &PhasePoint,
    itinerary: &[BranchChoice],
    t_total: f64,
    cfg: &FlowConfig,
) -> Result<BranchingTrajectory> {
    let energy = p0.energy(model);
    let eps_g = cfg.glancing_threshold(energy);
    let mut region = departure_region(model, p0);
    let mut p = p0.clone();
    let mut t = 0.0;
    let mut segments = Vec::new();
    let mut events: Vec<ReflectionEvent> = Vec::new();
    let mut glancing = Vec::new();
    let mut used = 0usize;
    let mut last_hit = f64::NEG_INFINITY;
    loop {
        let (seg, hit) = flow_segment_in(model, &p, region, t, t_total - t, cfg)?;
        t = seg.t1;
        segments.push(seg);
        let Some(hit) = hit else { break };
        if hit.t - last_hit < cfg.eps_t {
            return Err(Error::CoincidentEvents { t: hit.t });
        }
        last_hit = hit.t;
        match classify_hit(&hit, eps_g) {
            HitClass::Glancing => {
                glancing.push(hit.t);
                region = next_region(region, &hit, BranchChoice::Transmit);
                p = PhasePoint::new(hit.y.clone(), hit.xi_in.clone());
            }
            HitClass::Hyperbolic => {
                let Some(&choice) = itinerary.get(used) else {
                    return Err(Error::ItineraryExhausted { used });
                };
                used += 1;
                p = apply_branch(&hit, choice, eps_g)?;
                region = next_region(region, &hit, choice);
                events.push(ReflectionEvent {
                    xi_out: p.xi.clone(),
                    hit,
                    choice,
                });
            }
        }
        if t >= t_total {
            break;
        }
    }
    if cfg.strict && used < itinerary.len() {
        return Err(Error::ItineraryUnconsumed {
            remaining: itinerary.len() - used,
        });
    }
    let final_point = segments
        .last()
        .map(|s| PhasePoint::from_state(&s.dense.eval(s.t1), model.dimension))
        .unwrap_or_else(|| p0.clone());
    // after a terminal event the branched state is the right endpoint
    let final_point = if events.last().is_some_and(|e| e.hit.t >= t_total) {
        p.clone()
    } else {
        final_point
    };
    Ok(BranchingTrajectory {
        initial: p0.clone(),
        total_time: t_total,
        energy,
        segments,
        events,
        glancing,
        final_point,
        final_region: region,
    })
}

/// Breadth-first enumeration of all continuations with at most `n_max`
/// reflections over time `t_total`.
pub fn branch_flowout(
    model: &PotentialModel,
    p0: &PhasePoint,
    t_total: f64,
    n_max: usize,
    cfg: &FlowConfig,
) -> Result<Vec<(PhasePoint, Itinerary)>> {
    let energy = p0.energy(model);
    let eps_g = cfg.glancing_threshold(energy);
    struct Node {
        p: PhasePoint,
        region: Region,
        t: f64,
        word: Vec<BranchChoice>,
    }
    let mut queue = VecDeque::new();
    queue.push_back(Node {
        p: p0.clone(),
        region: departure_region(model, p0),
        t: 0.0,
        word: Vec::new(),
    });
    let mut leaves = Vec::new();
    while let Some(node) = queue.pop_front() {
        let (seg, hit) =
            flow_segment_in(model, &node.p, node.region, node.t, t_total - node.t, cfg)?;
        let Some(hit) = hit.filter(|h| h.t < t_total) else {
            let end = PhasePoint::from_state(&seg.dense.eval(seg.t1), model.dimension);
            leaves.push((
                end,
                Itinerary {
                    max_reflections: n_max,
                    choices: node.word,
                },
            ));
            if leaves.len() > cfg.branch_cap {
                return Err(Error::BranchExplosion {
                    cap: cfg.branch_cap,
                });
            }
            continue;
        };
        let mut options = vec![BranchChoice::Transmit];
        let hyperbolic = classify_hit(&hit, eps_g) == HitClass::Hyperbolic;
        if hyperbolic && reflections(&node.word) < n_max {
            options.insert(0, BranchChoice::Reflect);
        }
        for choice in options {
            let p = apply_branch(&hit, choice, eps_g)?;
            let mut word = node.word.clone();
            if hyperbolic {
                word.push(choice);
            }
            queue.push_back(Node {
                p,
                region: next_region(node.region, &hit, choice),
                t: hit.t,
                word,
            });
        }
        if queue.len() + leaves.len() > cfg.branch_cap {
            return Err(Error::BranchExplosion {
                cap: cfg.branch_cap,
            });
        }
    }
    Ok(leaves)
}
