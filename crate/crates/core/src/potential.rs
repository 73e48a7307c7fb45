//! Piecewise-smooth potentials conormal to a hypersurface.
//!
//! A model is a smooth base field plus, for every interface component
//! `Y_i = {f_i = 0}`, a pair of smooth side pieces: `plus` on `{f_i >= 0}` and
//! `minus` on `{f_i <= 0}`. Each piece is a sum of polynomial terms in either
//! an affine coordinate or an (elliptic) radius, which keeps every derivative
//! analytic. Finite differences only appear in tests.

use crate::error::{Error, Result};
use crate::jet::Jet;
use serde::{Deserialize, Serialize};

/// Scalar coordinate a polynomial term is written in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coord {
    /// `u = a . x - offset`
    Linear { normal: Vec<f64>, offset: f64 },
    /// `rho = sqrt(sum(((x_i - c_i) / s_i)^2))`
    Elliptic { center: Vec<f64>, scales: Vec<f64> },
}

/// `sum_k coeffs[k] * (coord(x) - shift)^k`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coord: Coord,
    #[serde(default)]
    pub shift: f64,
    pub coeffs: Vec<f64>,
}

fn poly_derivs(coeffs: &[f64], u: f64) -> (f64, f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    let mut ddp = 0.0;
    for &a in coeffs.iter().rev() {
        ddp = ddp * u + 2.0 * dp;
        dp = dp * u + p;
        p = p * u + a;
    }
    (p, dp, ddp)
}

impl Term {
    pub fn linear(normal: Vec<f64>, offset: f64, coeffs: Vec<f64>) -> Self {
        Term {
            coord: Coord::Linear { normal, offset },
            shift: 0.0,
            coeffs,
        }
    }

    pub fn elliptic(center: Vec<f64>, scales: Vec<f64>, shift: f64, coeffs: Vec<f64>) -> Self {
        Term {
            coord: Coord::Elliptic { center, scales },
            shift,
            coeffs,
        }
    }

    fn even_in_radius(&self) -> bool {
        matches!(self.coord, Coord::Elliptic { .. })
            && self.shift == 0.0
            && self.coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0)
    }

    fn even_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().step_by(2).cloned().collect()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.coord {
            Coord::Linear { normal, offset } => {
                let u = dot(normal, x) - offset - self.shift;
                poly_derivs(&self.coeffs, u).0
            }
            Coord::Elliptic { center, scales } => {
                let q = radius_sq(center, scales, x);
                if self.even_in_radius() {
                    poly_derivs(&self.even_coeffs(), q).0
                } else {
                    poly_derivs(&self.coeffs, q.sqrt() - self.shift).0
                }
            }
        }
    }

    /// Adds value, gradient and (row-major) Hessian of this term into the
    /// supplied accumulators.
    pub fn accumulate(
        &self,
        x: &[f64],
        value: &mut f64,
        grad: Option<&mut [f64]>,
        hess: Option<&mut [f64]>,
    ) {
        let n = x.len();
        match &self.coord {
            Coord::Linear { normal, offset } => {
                let u = dot(normal, x) - offset - self.shift;
                let (p, dp, ddp) = poly_derivs(&self.coeffs, u);
                *value += p;
                if let Some(g) = grad {
                    for i in 0..n {
                        g[i] += dp * normal[i];
                    }
                }
                if let Some(h) = hess {
                    for i in 0..n {
                        for j in 0..n {
                            h[i * n + j] += ddp * normal[i] * normal[j];
                        }
                    }
                }
            }
            Coord::Elliptic { center, scales } => {
                let q = radius_sq(center, scales, x);
                let mut gq = [0.0; 3];
                for i in 0..n {
                    gq[i] = 2.0 * (x[i] - center[i]) / (scales[i] * scales[i]);
                }
                if self.even_in_radius() {
                    let (p, dp, ddp) = poly_derivs(&self.even_coeffs(), q);
                    *value += p;
                    if let Some(g) = grad {
                        for i in 0..n {
                            g[i] += dp * gq[i];
                        }
                    }
                    if let Some(h) = hess {
                        for i in 0..n {
                            for j in 0..n {
                                let hq = if i == j {
                                    2.0 / (scales[i] * scales[i])
                                } else {
                                    0.0
                                };
                                h[i * n + j] += ddp * gq[i] * gq[j] + dp * hq;
                            }
                        }
                    }
                } else {
                    let rho = q.sqrt();
                    let (p, dp, ddp) = poly_derivs(&self.coeffs, rho - self.shift);
                    *value += p;
                    let mut gr = [0.0; 3];
                    for i in 0..n {
                        gr[i] = gq[i] / (2.0 * rho);
                    }
                    if let Some(g) = grad {
                        for i in 0..n {
                            g[i] += dp * gr[i];
                        }
                    }
                    if let Some(h) = hess {
                        for i in 0..n {
                            for j in 0..n {
                                let hq = if i == j {
                                    2.0 / (scales[i] * scales[i])
                                } else {
                                    0.0
                                };
                                let hr = hq / (2.0 * rho) - gq[i] * gq[j] / (4.0 * rho * rho * rho);
                                h[i * n + j] += ddp * gr[i] * gr[j] + dp * hr;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Taylor jet of the term along the line `x + s v`.
    pub fn line_jet(&self, x: &[f64], v: &[f64], degree: usize) -> Jet {
        match &self.coord {
            Coord::Linear { normal, offset } => {
                let u = Jet::variable(dot(normal, x) - offset - self.shift, dot(normal, v), degree);
                u.polynomial(&self.coeffs)
            }
            Coord::Elliptic { center, scales } => {
                let mut q = Jet::constant(0.0, degree);
                for i in 0..x.len() {
                    let comp =
                        Jet::variable((x[i] - center[i]) / scales[i], v[i] / scales[i], degree);
                    q = &q + &(&comp * &comp);
                }
                if self.even_in_radius() {
                    q.polynomial(&self.even_coeffs())
                } else {
                    q.sqrt().add_scalar(-self.shift).polynomial(&self.coeffs)
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn radius_sq(center: &[f64], scales: &[f64], x: &[f64]) -> f64 {
    x.iter()
        .zip(center)
        .zip(scales)
        .map(|((xi, ci), si)| ((xi - ci) / si).powi(2))
        .sum()
}

/// A smooth scalar field written as a sum of polynomial terms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub terms: Vec<Term>,
}

impl Field {
    pub fn zero() -> Self {
        Field { terms: Vec::new() }
    }

    pub fn single(term: Term) -> Self {
        Field { terms: vec![term] }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.value(x)).sum()
    }

    pub fn accumulate(
        &self,
        x: &[f64],
        value: &mut f64,
        mut grad: Option<&mut [f64]>,
        mut hess: Option<&mut [f64]>,
    ) {
        for t in &self.terms {
            t.accumulate(x, value, grad.as_deref_mut(), hess.as_deref_mut());
        }
    }

    pub fn line_jet(&self, x: &[f64], v: &[f64], degree: usize) -> Jet {
        let mut acc = Jet::constant(0.0, degree);
        for t in &self.terms {
            acc = &acc + &t.line_jet(x, v, degree);
        }
        acc
    }
}

/// One connected component of the interface with its two side pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    pub defining: Term,
    pub plus: Field,
    pub minus: Field,
}

impl Interface {
    pub fn f(&self, x: &[f64]) -> f64 {
        self.defining.value(x)
    }

    pub fn grad_f(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        let mut v = 0.0;
        self.defining.accumulate(x, &mut v, Some(&mut g), None);
        g
    }

    pub fn hess_f(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut h = vec![0.0; n * n];
        let mut v = 0.0;
        self.defining.accumulate(x, &mut v, None, Some(&mut h));
        h
    }

    /// Unit normal `grad f / |grad f|`, pointing into the plus side.
    pub fn unit_normal(&self, x: &[f64]) -> Vec<f64> {
        let g = self.grad_f(x);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        g.iter().map(|v| v / norm).collect()
    }

    /// Deterministic sample of points on this component.
    pub fn sample_points(&self, dimension: usize, count: usize) -> Vec<Vec<f64>> {
        match &self.defining.coord {
            Coord::Linear { normal, offset } => {
                // zero of sum c_k u^k closest to u = 0 is assumed at u = 0
                let nn: f64 = normal.iter().map(|v| v * v).sum();
                let level = offset + self.defining.shift + linear_root(&self.defining.coeffs);
                let base: Vec<f64> = normal.iter().map(|a| a * level / nn).collect();
                if dimension == 1 {
                    return vec![base];
                }
                let tangent = [-normal[1], normal[0]];
                let tn = nn.sqrt();
                (0..count)
                    .map(|k| {
                        let s = -1.0 + 2.0 * (k as f64 + 0.5) / count as f64;
                        vec![base[0] + s * tangent[0] / tn, base[1] + s * tangent[1] / tn]
                    })
                    .collect()
            }
            Coord::Elliptic { center, scales } => {
                let r0 = self.defining.shift + linear_root(&self.defining.coeffs);
                if dimension == 1 {
                    return vec![
                        vec![center[0] - r0 * scales[0]],
                        vec![center[0] + r0 * scales[0]],
                    ];
                }
                (0..count)
                    .map(|k| {
                        let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.37) / count as f64;
                        vec![
                            center[0] + r0 * scales[0] * th.cos(),
                            center[1] + r0 * scales[1] * th.sin(),
                        ]
                    })
                    .collect()
            }
        }
    }
}

// Root of c0 + c1 u (the defining polynomials used here are affine in u).
fn linear_root(coeffs: &[f64]) -> f64 {
    match coeffs {
        [c0, c1, ..] if *c1 != 0.0 => -c0 / c1,
        _ => 0.0,
    }
}

/// Bitmask of interface sides: bit `i` set means `f_i >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region(pub u32);

impl Region {
    pub fn is_plus(&self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn with_side(&self, i: usize, plus: bool) -> Region {
        if plus {
            Region(self.0 | (1 << i))
        } else {
            Region(self.0 & !(1 << i))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confinement {
    pub confining: bool,
    /// Coefficient of an added `strength * |x|^2` term, if any.
    pub strength: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialModel {
    pub name: String,
    pub dimension: usize,
    pub k0: u32,
    pub base: Field,
    pub interfaces: Vec<Interface>,
    pub confinement: Confinement,
}

/// Jump of the `k0`-th normal derivative at an interface point.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpSample {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
    pub component: usize,
    pub value: f64,
}

pub const INTERFACE_TOL: f64 = 1e-10;

impl PotentialModel {
    pub fn region_of(&self, x: &[f64]) -> Region {
        let mut bits = 0u32;
        for (i, itf) in self.interfaces.iter().enumerate() {
            if itf.f(x) >= 0.0 {
                bits |= 1 << i;
            }
        }
        Region(bits)
    }

    /// V(x), choosing each side piece by the sign of its defining function.
    pub fn eval_potential(&self, x: &[f64]) -> f64 {
        self.value_in(x, self.region_of(x))
    }

    pub fn value_in(&self, x: &[f64], region: Region) -> f64 {
        let mut v = self.base.value(x);
        for (i, itf) in self.interfaces.iter().enumerate() {
            v += if region.is_plus(i) {
                itf.plus.value(x)
            } else {
                itf.minus.value(x)
            };
        }
        v
    }

    /// Value, gradient and Hessian of the smooth extension of the piece
    /// belonging to `region`.
    pub fn derivatives_in(
        &self,
        x: &[f64],
        region: Region,
        grad: &mut [f64],
        hess: Option<&mut [f64]>,
    ) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut hess = hess;
        if let Some(h) = hess.as_deref_mut() {
            h.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut value = 0.0;
        self.base
            .accumulate(x, &mut value, Some(grad), hess.as_deref_mut());
        for (i, itf) in self.interfaces.iter().enumerate() {
            let piece = if region.is_plus(i) {
                &itf.plus
            } else {
                &itf.minus
            };
            piece.accumulate(x, &mut value, Some(grad), hess.as_deref_mut());
        }
        value
    }

    pub fn gradient_in(&self, x: &[f64], region: Region) -> Vec<f64> {
        let mut g = vec![0.0; self.dimension];
        self.derivatives_in(x, region, &mut g, None);
        g
    }

    pub fn hessian_in(&self, x: &[f64], region: Region) -> Vec<f64> {
        let n = self.dimension;
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n * n];
        self.derivatives_in(x, region, &mut g, Some(&mut h));
        h
    }

    pub fn line_jet_in(&self, x: &[f64], v: &[f64], region: Region, degree: usize) -> Jet {
        let mut acc = self.base.line_jet(x, v, degree);
        for (i, itf) in self.interfaces.iter().enumerate() {
            let piece = if region.is_plus(i) {
                &itf.plus
            } else {
                &itf.minus
            };
            acc = &acc + &piece.line_jet(x, v, degree);
        }
        acc
    }

    /// Interface component closest to `y`, if within tolerance.
    pub fn locate_interface(&self, y: &[f64]) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, itf) in self.interfaces.iter().enumerate() {
            let r = itf.f(y).abs();
            if best.map_or(true, |(_, b)| r < b) {
                best = Some((i, r));
            }
        }
        match best {
            Some((i, r)) if r <= INTERFACE_TOL => Ok(i),
            Some((_, r)) => Err(Error::NotOnInterface { residual: r }),
            None => Err(Error::NotOnInterface {
                residual: f64::INFINITY,
            }),
        }
    }

    /// `J(y, v)`: jump of the `k0`-th derivative along `v`, from the side `v`
    /// points into minus the side it points away from. `v` is snapped to the
    /// exact unit normal with the orientation of the supplied vector.
    pub fn jump(&self, y: &[f64], v: &[f64]) -> Result<f64> {
        let i = self.locate_interface(y)?;
        self.jump_on(i, y, v)
    }

    pub fn jump_on(&self, i: usize, y: &[f64], v: &[f64]) -> Result<f64> {
        let itf = &self.interfaces[i];
        let r = itf.f(y).abs();
        if r > INTERFACE_TOL {
            return Err(Error::NotOnInterface { residual: r });
        }
        let n = itf.unit_normal(y);
        let s = if dot(&n, v) >= 0.0 { 1.0 } else { -1.0 };
        let dir: Vec<f64> = n.iter().map(|c| s * c).collect();
        let k = self.k0 as usize;
        let (ahead, behind) = if s > 0.0 {
            (&itf.plus, &itf.minus)
        } else {
            (&itf.minus, &itf.plus)
        };
        let a = ahead.line_jet(y, &dir, k).derivative_at(k);
        let b = behind.line_jet(y, &dir, k).derivative_at(k);
        Ok(a - b)
    }

    pub fn jump_sample(&self, i: usize, y: &[f64], v: &[f64]) -> Result<JumpSample> {
        let value = self.jump_on(i, y, v)?;
        Ok(JumpSample {
            point: y.to_vec(),
            normal: v.to_vec(),
            component: i,
            value,
        })
    }

    /// Checks the conormal structure at sampled interface points.
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dimension) {
            return Err(Error::InvalidModel(format!(
                "dimension {} not in {{1, 2}}",
                self.dimension
            )));
        }
        if self.interfaces.is_empty() {
            return Ok(());
        }
        if self.k0 < 2 {
            return Err(Error::InvalidModel(format!("k0 = {} < 2", self.k0)));
        }
        if self.interfaces.len() > 32 {
            return Err(Error::InvalidModel(
                "more than 32 interface components".into(),
            ));
        }
        let k = self.k0 as usize;
        let mut any_jump = false;
        for (i, itf) in self.interfaces.iter().enumerate() {
            for y in itf.sample_points(self.dimension, 16) {
                let g = itf.grad_f(&y);
                let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if gn < 1e-6 {
                    return Err(Error::InvalidModel(format!(
                        "|grad f| = {gn:e} on component {i}"
                    )));
                }
                if itf.f(&y).abs() > 1e-9 {
                    return Err(Error::InvalidModel(format!(
                        "sample point off component {i}"
                    )));
                }
                let n = itf.unit_normal(&y);
                let jp = itf.plus.line_jet(&y, &n, k);
                let jm = itf.minus.line_jet(&y, &n, k);
                for j in 0..k {
                    let d = jp.derivative_at(j) - jm.derivative_at(j);
                    if d.abs() > 1e-8 * (1.0 + jp.derivative_at(j).abs()) {
                        return Err(Error::InvalidModel(format!(
                            "derivative of order {j} jumps by {d:e} on component {i}"
                        )));
                    }
                }
                if (jp.derivative_at(k) - jm.derivative_at(k)).abs() > 1e-12 {
                    any_jump = true;
                }
            }
        }
        if !any_jump {
            return Err(Error::InvalidModel(format!(
                "no jump in the order-{k} normal derivative"
            )));
        }
        Ok(())
    }

    /// Largest |x| on the classically allowed set {V <= e}, by bisection
    /// along each coordinate axis. Only meaningful for confining models.
    pub fn turning_radius(&self, e: f64) -> f64 {
        let n = self.dimension;
        let mut r_max: f64 = 0.0;
        for axis in 0..n {
            for sign in [-1.0, 1.0] {
                let at = |r: f64| {
                    let mut x = vec![0.0; n];
                    x[axis] = sign * r;
                    self.eval_potential(&x)
                };
                let mut hi = 1.0;
                while at(hi) <= e && hi < 1e6 {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if at(mid) <= e {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                r_max = r_max.max(hi);
            }
        }
        r_max
    }
}

/// Parameters for the built-in catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub k0: u32,
    /// Prefactor `c` of the one-sided kink `c x_+^k0`.
    pub coefficient: f64,
    /// Harmonic frequencies (one per axis, or one for all axes).
    pub omega: Vec<f64>,
    pub confinement: f64,
    /// Semi-axes of the elliptic bathtub.
    pub semi_axes: Vec<f64>,
    pub dimension: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            k0: 2,
            coefficient: 1.0,
            omega: vec![1.0],
            confinement: 0.05,
            semi_axes: vec![1.25, 1.0],
            dimension: 1,
        }
    }
}

pub const BUILTIN_NAMES: [&str; 7] = [
    "free",
    "kink1d",
    "bathtub1d",
    "bathtub1d-confined",
    "harmonic",
    "radial-bathtub-2d",
    "elliptic-bathtub-2d",
];

fn kink_coeffs(k0: u32, c: f64) -> Vec<f64> {
    let mut v = vec![0.0; k0 as usize + 1];
    v[k0 as usize] = c;
    v
}

/// Looks up a built-in model by name.
pub fn builtin(name: &str, p: &ModelParams) -> Result<PotentialModel> {
    let k0 = p.k0;
    let none = Confinement {
        confining: false,
        strength: 0.0,
    };
    let confining = Confinement {
        confining: true,
        strength: 0.0,
    };
    let model = match name {
        "free" => PotentialModel {
            name: name.into(),
            dimension: p.dimension.max(1),
            k0,
            base: Field::zero(),
            interfaces: vec![],
            confinement: none,
        },
        "kink1d" => PotentialModel {
            name: name.into(),
            dimension: 1,
            k0,
            base: Field::zero(),
            interfaces: vec![Interface {
                defining: Term::linear(vec![1.0], 0.0, vec![0.0, 1.0]),
                plus: Field::single(Term::linear(vec![1.0], 0.0, kink_coeffs(k0, p.coefficient))),
                minus: Field::zero(),
            }],
            confinement: none,
        },
        "bathtub1d" | "bathtub1d-confined" => {
            let wall = |sign: f64| Interface {
                defining: Term::linear(vec![sign], 1.0, vec![0.0, 1.0]),
                plus: Field::single(Term::linear(vec![sign], 1.0, kink_coeffs(k0, 1.0))),
                minus: Field::zero(),
            };
            let (base, conf) = if name == "bathtub1d-confined" {
                (
                    Field::single(Term::linear(vec![1.0], 0.0, vec![0.0, 0.0, p.confinement])),
                    Confinement {
                        confining: true,
                        strength: p.confinement,
                    },
                )
            } else {
                (Field::zero(), confining.clone())
            };
            PotentialModel {
                name: name.into(),
                dimension: 1,
                k0,
                base,
                interfaces: vec![wall(1.0), wall(-1.0)],
                confinement: conf,
            }
        }
        "harmonic" => {
            let n = p.dimension.max(p.omega.len()).max(1);
            let omegas: Vec<f64> = (0..n)
                .map(|i| *p.omega.get(i).unwrap_or(&p.omega[0]))
                .collect();
            let terms = omegas
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let mut a = vec![0.0; n];
                    a[i] = 1.0;
                    Term::linear(a, 0.0, vec![0.0, 0.0, w * w / 4.0])
                })
                .collect();
            PotentialModel {
                name: name.into(),
                dimension: n,
                k0,
                base: Field { terms },
                interfaces: vec![],
                confinement: confining,
            }
        }
        "radial-bathtub-2d" | "elliptic-bathtub-2d" => {
            let scales = if name == "radial-bathtub-2d" {
                vec![1.0, 1.0]
            } else {
                p.semi_axes.clone()
            };
            PotentialModel {
                name: name.into(),
                dimension: 2,
                k0,
                base: Field::zero(),
                interfaces: vec![Interface {
                    defining: Term::elliptic(vec![0.0, 0.0], scales.clone(), 1.0, vec![0.0, 1.0]),
                    plus: Field::single(Term::elliptic(
                        vec![0.0, 0.0],
                        scales,
                        1.0,
                        kink_coeffs(k0, 1.0),
                    )),
                    minus: Field::zero(),
                }],
                confinement: confining,
            }
        }
        other => return Err(Error::InvalidModel(format!("unknown model `{other}`"))),
    };
    model.validate()?;
    Ok(model)
}

/// Every built-in model with default parameters.
pub fn builtin_models() -> Vec<PotentialModel> {
    BUILTIN_NAMES
        .iter()
        .map(|name| {
            let mut p = ModelParams::default();
            if name.ends_with("2d") {
                p.dimension = 2;
            }
            builtin(name, &p).expect("built-in models validate")
        })
        .collect()
}

/// One-dimensional model with a single interface at `x = a` and polynomial
/// pieces written in powers of `(x - a)`.
pub fn piecewise_polynomial_1d(
    a: f64,
    left: Vec<f64>,
    right: Vec<f64>,
    k0: u32,
) -> Result<PotentialModel> {
    let model = PotentialModel {
        name: "custom1d".into(),
        dimension: 1,
        k0,
        base: Field::zero(),
        interfaces: vec![Interface {
            defining: Term::linear(vec![1.0], a, vec![0.0, 1.0]),
            plus: Field::single(Term::linear(vec![1.0], a, right)),
            minus: Field::single(Term::linear(vec![1.0], a, left)),
        }],
        confinement: Confinement {
            confining: false,
            strength: 0.0,
        },
    };
    model.validate()?;
    Ok(model)
}
