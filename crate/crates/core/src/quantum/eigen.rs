use crate::error::{Error, Result};
use crate::potential::PotentialModel;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Dirichlet interval `[left, right]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub left: f64,
    pub right: f64,
}

/// Grid nodes fall on multiples of `1 / GRID_UNIT` at every refinement, so
/// kinks at such points sit on nodes.
pub const GRID_UNIT: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub h: f64,
    pub domain: Domain,
    /// Intervals of the finest grid used.
    pub grid_n: usize,
    pub window: (f64, f64),
    /// Index of the first retained eigenvalue in the full spectrum.
    pub first_index: usize,
    pub eigenvalues: Vec<f64>,
    /// Change of each eigenvalue between the last two refinements.
    pub drift: Vec<f64>,
}

/// Symmetric tridiagonal matrix `-h^2 D^2 + V` on interior nodes: diagonal
/// `2k + pot[i]`, off-diagonal `-k`, with `k = h^2 / dx^2`.
#[derive(Clone, Debug)]
pub struct Tridiagonal {
    pub pot: Vec<f64>,
    pub k: f64,
}

impl Tridiagonal {
    pub fn schrodinger(model: &PotentialModel, h: f64, domain: Domain, n: usize) -> Self {
        let dx = (domain.right - domain.left) / n as f64;
        let pot = (1..n)
            .map(|i| model.eval_potential(&[domain.left + i as f64 * dx]))
            .collect();
        Tridiagonal { pot, k: h * h / (dx * dx) }
    }

    pub fn dim(&self) -> usize {
        self.pot.len()
    }

    /// Number of eigenvalues below `lambda`. The Sturm sequence is run on
    /// `s_i = q_i / k - 1`, which obeys `s_i = w_i + s_{i-1} / (1 + s_{i-1})`
    /// with `w_i = (pot_i - lambda) / k`. Nothing of size `2k` is ever
    /// cancelled, so rounding costs `eps k^{1/2}` in the eigenvalue rather
    /// than `eps k`.
    pub fn count_below(&self, lambda: f64) -> usize {
        let mut carry = 1.0;
        let mut neg = 0;
        for &v in &self.pot {
            let mut s = (v - lambda) / self.k + carry;
            if s == -1.0 {
                s = -1.0 - f64::EPSILON;
            }
            if s < -1.0 {
                neg += 1;
            }
            carry = s / (1.0 + s);
        }
        neg
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let lo = self.pot.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.pot.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 4.0 * self.k;
        (lo, hi)
    }

    /// The `j`-th eigenvalue (0-based) by bisection to full precision.
    pub fn eigenvalue(&self, j: usize, bracket: (f64, f64)) -> f64 {
        let (mut lo, mut hi) = bracket;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for `lambda` by inverse iteration, normalized in the
    /// discrete `l^2` norm.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let m = self.dim();
        let off = -self.k;
        let shift = lambda + 1e-10 * (1.0 + lambda.abs());
        let diag = |i: usize| 2.0 * self.k + self.pot[i] - shift;
        let mut v = vec![1.0; m];
        for _ in 0..3 {
            // Thomas algorithm on (T - shift) x = v
            let mut c = vec![0.0; m];
            let mut d = vec![0.0; m];
            let mut denom = diag(0);
            c[0] = off / denom;
            d[0] = v[0] / denom;
            for i in 1..m {
                denom = diag(i) - off * c[i - 1];
                if denom == 0.0 {
                    denom = 1e-300;
                }
                c[i] = off / denom;
                d[i] = (v[i] - off * d[i - 1]) / denom;
            }
            let mut x = vec![0.0; m];
            x[m - 1] = d[m - 1];
            for i in (0..m - 1).rev() {
                x[i] = d[i] - c[i] * x[i + 1];
            }
            let nrm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            v = x.into_iter().map(|a| a / nrm).collect();
        }
        v
    }

    pub fn residual(&self, lambda: f64, v: &[f64]) -> f64 {
        let m = v.len();
        (0..m)
            .map(|i| {
                let mut r = (2.0 * self.k + self.pot[i] - lambda) * v[i];
                if i > 0 {
                    r -= self.k * v[i - 1];
                }
                if i + 1 < m {
                    r -= self.k * v[i + 1];
                }
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }
}

fn turning_points(model: &PotentialModel, e: f64) -> Option<(f64, f64)> {
    let probe = |dir: f64| -> Option<f64> {
        let mut x: f64 = 0.0;
        let mut step: f64 = 0.25;
        let mut last_allowed = if model.eval_potential(&[0.0]) <= e { Some(0.0) } else { None };
        while x.abs() < 1e4 {
            x += dir * step;
            if model.eval_potential(&[x]) <= e {
                last_allowed = Some(x);
            } else if last_allowed.is_some() && x.abs() > 2.0 * last_allowed.unwrap().abs() + 4.0 {
                break;
            }
            step *= 1.05;
        }
        let a = last_allowed?;
        // refine the outer crossing
        let (mut lo, mut hi) = (a, a + dir * step);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if model.eval_potential(&[mid]) <= e {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    };
    Some((probe(-1.0)?, probe(1.0)?))
}

/// Decay exponent `int sqrt(V - E) dx / h` required between the outermost
/// turning point and each wall; the wall then shifts levels by about
/// `exp(-2 AGMON)`.
pub const AGMON: f64 = 20.0;

/// Walls at 1.5 times the outermost turning points of `e_max`, pushed out
/// until the tunnelling exponent reaches `AGMON`, rounded outward to the
/// grid unit.
pub fn auto_domain(model: &PotentialModel, e_max: f64, h: f64) -> Result<Domain> {
    if !model.confinement.confining {
        return Err(Error::InvalidModel(format!(
            "model '{}' is not confining; supply an explicit domain",
            model.name
        )));
    }
    let (l, r) = turning_points(model, e_max)
        .ok_or_else(|| Error::InvalidModel("no classically allowed region in the window".into()))?;
    let reach = |x0: f64, dir: f64| -> f64 {
        let dx = 1e-3 * (1.0 + x0.abs());
        let mut x = x0;
        let mut exponent = 0.0;
        while exponent < AGMON * h && (x - x0).abs() < 1e4 {
            let mid = x + 0.5 * dir * dx;
            exponent += (model.eval_potential(&[mid]) - e_max).max(0.0).sqrt() * dx;
            x += dir * dx;
        }
        x
    };
    let round_out = |x: f64| (x * GRID_UNIT).abs().ceil() / GRID_UNIT * x.signum();
    Ok(Domain {
        left: round_out((1.5 * l).min(reach(l, -1.0)).min(-1e-3)),
        right: round_out((1.5 * r).max(reach(r, 1.0)).max(1e-3)),
    })
}

fn check_walls(model: &PotentialModel, domain: Domain, e_max: f64) -> Result<()> {
    if !model.confinement.confining {
        return Ok(());
    }
    let len = domain.right - domain.left;
    let band = 0.1 * len;
    let k = 64;
    for j in 0..=k {
        let s = band * j as f64 / k as f64;
        for x in [domain.left + s, domain.right - s] {
            if model.eval_potential(&[x]) <= e_max {
                return Err(Error::WallTooClose);
            }
        }
    }
    Ok(())
}

fn spectrum_on(model: &PotentialModel, h: f64, domain: Domain, n: usize, first: usize, count: usize) -> Vec<f64> {
    let t = Tridiagonal::schrodinger(model, h, domain, n);
    let bracket = t.gershgorin();
    (first..first + count)
        .into_par_iter()
        .map(|k| t.eigenvalue(k, bracket))
        .collect()
}

/// Grid-refinement tolerance on retained eigenvalues, relative to `max(1, |E|)`.
pub const DRIFT_TOL: f64 = 1e-7;

/// Eigenvalues of `-h^2 u'' + V u = E u` with Dirichlet walls lying in
/// `window`, from central differences on doubling grids combined in a
/// Romberg table (repeated Richardson elimination of `dx^2, dx^4, ...`).
/// Stops once the best estimates move by less than `DRIFT_TOL max(1, |E|)`.
pub fn eigensolve_1d(
    model: &PotentialModel,
    h: f64,
    domain: Option<Domain>,
    grid_n: usize,
    window: (f64, f64),
) -> Result<SpectrumResult> {
    eigensolve_1d_tol(model, h, domain, grid_n, window, DRIFT_TOL)
}

pub fn eigensolve_1d_tol(
    model: &PotentialModel,
    h: f64,
    domain: Option<Domain>,
    grid_n: usize,
    window: (f64, f64),
    tol: f64,
) -> Result<SpectrumResult> {
    if model.dimension != 1 {
        return Err(Error::InvalidModel("eigensolver is one-dimensional".into()));
    }
    let domain = match domain {
        Some(d) => d,
        None => auto_domain(model, window.1, h)?,
    };
    check_walls(model, domain, window.1)?;
    let len = domain.right - domain.left;
    // start near four points per local wavelength at the window top
    let v_min = (0..=256)
        .map(|i| model.eval_potential(&[domain.left + len * i as f64 / 256.0]))
        .fold(f64::INFINITY, f64::min);
    let k_max = (window.1 - v_min).max(1e-12).sqrt() / h;
    let resolved = (len * k_max * 2.0 / PI).ceil() as usize;
    let unit = (len * GRID_UNIT).round().max(1.0) as usize;
    let aligned = ((len * GRID_UNIT) - unit as f64).abs() < 1e-9;
    let mut n = grid_n.max(resolved).max(16);
    if aligned {
        n = n.div_ceil(unit) * unit;
    }
    let probe = Tridiagonal::schrodinger(model, h, domain, n);
    // two spare levels on each side absorb index shifts on refinement
    let first = probe.count_below(window.0).saturating_sub(2);
    let count = (probe.count_below(window.1) + 2).min(n - 1) - first;
    let mut rows: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut best_prev: Option<Vec<f64>> = None;
    let mut worst = f64::INFINITY;
    for _ in 0..10 {
        let raw = spectrum_on(model, h, domain, n, first, count);
        let row: Vec<Vec<f64>> = (0..count)
            .map(|j| {
                let mut r = vec![raw[j]];
                if let Some(last) = rows.last() {
                    for m in 1..=last[j].len() {
                        let f = 4f64.powi(m as i32);
                        let v = (f * r[m - 1] - last[j][m - 1]) / (f - 1.0);
                        r.push(v);
                    }
                }
                r
            })
            .collect();
        let best: Vec<f64> = row.iter().map(|r| *r.last().unwrap()).collect();
        rows.push(row);
        if let Some(prev) = &best_prev {
            let drift: Vec<f64> = best.iter().zip(prev).map(|(a, b)| (a - b).abs()).collect();
            let inside: Vec<usize> = (0..count).filter(|&i| best[i] >= window.0 && best[i] < window.1).collect();
            worst = inside
                .iter()
                .map(|&i| drift[i] / best[i].abs().max(1.0))
                .fold(0.0, f64::max);
            if worst < tol {
                let eigenvalues: Vec<f64> = inside.iter().map(|&i| best[i]).collect();
                if eigenvalues.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::NotConverged { drift: worst });
                }
                return Ok(SpectrumResult {
                    h,
                    domain,
                    grid_n: n,
                    window,
                    first_index: first + inside.first().copied().unwrap_or(0),
                    drift: inside.iter().map(|&i| drift[i]).collect(),
                    eigenvalues,
                });
            }
        }
        best_prev = Some(best);
        n *= 2;
    }
    Err(Error::NotConverged { drift: worst })
}
