//! Adaptive Dormand–Prince 5(4) integrator with 4th-order dense output and
//! sign-change event location.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
    /// Root tolerance on the event function value.
    pub event_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            rtol: 1e-12,
            atol: 1e-13,
            h_min: 1e-13,
            max_steps: 2_000_000,
            event_tol: 1e-12,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its continuous extension.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    /// Five coefficient blocks of length `dim`.
    pub rcont: Vec<f64>,
}

impl DenseStep {
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let dim = out.len();
        let th = if self.h == 0.0 {
            0.0
        } else {
            (t - self.t0) / self.h
        };
        let th1 = 1.0 - th;
        for i in 0..dim {
            let r = |k: usize| self.rcont[k * dim + i];
            out[i] = r(0) + th * (r(1) + th1 * (r(2) + th * (r(3) + th1 * r(4))));
        }
    }
}

/// Piecewise dense output over `[t_start, t_end]`.
#[derive(Clone, Debug, Default)]
pub struct DenseSolution {
    pub dim: usize,
    pub steps: Vec<DenseStep>,
}

impl DenseSolution {
    pub fn t_start(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.t0)
    }

    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.t0 + s.h)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        if self.steps.is_empty() {
            return out;
        }
        let idx = self
            .steps
            .partition_point(|s| s.t0 + s.h < t)
            .min(self.steps.len() - 1);
        self.steps[idx].eval_into(t, &mut out);
        out
    }

    /// Knots of the accepted mesh, useful for quadrature.
    pub fn mesh(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.steps.iter().map(|s| s.t0).collect();
        m.push(self.t_end());
        m
    }
}

/// Where an integration stopped.
#[derive(Clone, Debug, PartialEq)]
pub enum Stop {
    Reached,
    Event { index: usize },
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub dense: DenseSolution,
    pub t: f64,
    pub y: Vec<f64>,
    pub stop: Stop,
    pub steps: usize,
}

/// Event functions: `eval(y, out)` fills one value per component; a hit is
/// recorded when component `i` takes a sign opposite to `expected[i]`.
pub struct Events<'a> {
    pub eval: &'a dyn Fn(&[f64], &mut [f64]),
    pub expected: Vec<f64>,
    pub separation: f64,
}

struct Stepper {
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
}

impl Stepper {
    fn new(dim: usize) -> Self {
        Stepper {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            ytmp: vec![0.0; dim],
        }
    }

    /// Takes one step from `(t, y)` with `k[0] = f(t, y)` already set.
    /// Writes the 5th-order solution into `ynew` and returns the scaled error.
    fn step<F: FnMut(f64, &[f64], &mut [f64])>(
        &mut self,
        f: &mut F,
        t: f64,
        y: &[f64],
        h: f64,
        ynew: &mut [f64],
        opts: &Options,
    ) -> f64 {
        let dim = y.len();
        let (k1, rest) = self.k.split_at_mut(1);
        let k1 = &k1[0];
        let [k2, k3, k4, k5, k6, k7] = rest else {
            unreachable!()
        };
        let yt = &mut self.ytmp;
        for i in 0..dim {
            yt[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, yt, k2);
        for i in 0..dim {
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, yt, k3);
        for i in 0..dim {
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, yt, k4);
        for i in 0..dim {
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, yt, k5);
        for i in 0..dim {
            yt[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, yt, k6);
        for i in 0..dim {
            ynew[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + h, ynew, k7);
        let mut err = 0.0;
        for i in 0..dim {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc).powi(2);
        }
        (err / dim as f64).sqrt()
    }

    fn dense(&self, t: f64, y: &[f64], ynew: &[f64], h: f64) -> DenseStep {
        let dim = y.len();
        let mut rcont = vec![0.0; 5 * dim];
        let k = &self.k;
        for i in 0..dim {
            let ydiff = ynew[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            rcont[i] = y[i];
            rcont[dim + i] = ydiff;
            rcont[2 * dim + i] = bspl;
            rcont[3 * dim + i] = ydiff - h * k[6][i] - bspl;
            rcont[4 * dim + i] = h
                * (D1 * k[0][i]
                    + D3 * k[2][i]
                    + D4 * k[3][i]
                    + D5 * k[4][i]
                    + D6 * k[5][i]
                    + D7 * k[6][i]);
        }
        DenseStep { t0: t, h, rcont }
    }
}

const SCAN: usize = 16;

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, stopping early at the
/// first event. Events are located on the dense output and then polished by
/// re-stepping from the start of the step until the event value is below
/// `opts.event_tol`.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &Options,
    events: Option<&Events>,
) -> Result<Outcome>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut st = Stepper::new(dim);
    let mut dense = DenseSolution {
        dim,
        steps: Vec::new(),
    };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut ynew = vec![0.0; dim];
    if t_end <= t0 {
        return Ok(Outcome {
            dense,
            t,
            y,
            stop: Stop::Reached,
            steps: 0,
        });
    }
    let mut h = (0.01f64).min(t_end - t0);
    f(t, &y, &mut st.k[0]);
    let n_ev = events.map_or(0, |e| e.expected.len());
    let mut gbuf = vec![0.0; n_ev];
    let mut tmp = vec![0.0; dim];
    let mut steps = 0usize;
    let mut first = true;
    loop {
        if steps >= opts.max_steps {
            return Err(Error::StepSizeUnderflow { t });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let err = st.step(&mut f, t, &y, h, &mut ynew, opts);
        if !err.is_finite() || err > 1.0 {
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= fac;
            if h < opts.h_min {
                return Err(Error::StepSizeUnderflow { t });
            }
            continue;
        }
        steps += 1;
        let step = st.dense(t, &y, &ynew, h);

        if let Some(ev) = events {
            // scan the continuous extension; refine every component that fires
            let mut times: Vec<(usize, f64, Vec<f64>)> = Vec::new();
            for i in 0..n_ev {
                let mut lo = 0.0;
                for j in 1..=SCAN {
                    let th = j as f64 / SCAN as f64;
                    step.eval_into(t + th * h, &mut tmp);
                    (ev.eval)(&tmp, &mut gbuf);
                    if gbuf[i] * ev.expected[i] < 0.0 {
                        let (hs, ys) = refine(
                            &mut st,
                            &mut f,
                            t,
                            &y,
                            h * lo,
                            h * th,
                            i,
                            ev,
                            opts,
                            first && lo == 0.0,
                        )?;
                        times.push((i, hs, ys));
                        break;
                    }
                    lo = th;
                }
            }
            times.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            if !times.is_empty() {
                if times.len() > 1 && times[1].1 - times[0].1 < ev.separation {
                    return Err(Error::CoincidentEvents { t: t + times[0].1 });
                }
                let (index, hs, ys) = times.swap_remove(0);
                // rebuild the final dense step over the truncated interval
                f(t, &y, &mut st.k[0]);
                let mut yn = vec![0.0; dim];
                st.step(&mut f, t, &y, hs, &mut yn, opts);
                dense.steps.push(st.dense(t, &y, &ys, hs));
                return Ok(Outcome {
                    dense,
                    t: t + hs,
                    y: ys,
                    stop: Stop::Event { index },
                    steps,
                });
            }
        }

        dense.steps.push(step);
        t += h;
        std::mem::swap(&mut y, &mut ynew);
        first = false;
        if last {
            return Ok(Outcome {
                dense,
                t: t_end,
                y,
                stop: Stop::Reached,
                steps,
            });
        }
        let (head, tail) = st.k.split_at_mut(6);
        head[0].copy_from_slice(&tail[0]);
        let fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
        h *= fac;
        if h < opts.h_min {
            return Err(Error::StepSizeUnderflow { t });
        }
    }
}

/// Illinois regula falsi on `hs -> g_i(step(y, hs))` over `[a, b]`.
#[allow(clippy::too_many_arguments)]
fn refine<F: FnMut(f64, &[f64], &mut [f64])>(
    st: &mut Stepper,
    f: &mut F,
    t: f64,
    y: &[f64],
    a: f64,
    b: f64,
    i: usize,
    ev: &Events,
    opts: &Options,
    from_start: bool,
) -> Result<(f64, Vec<f64>)> {
    let dim = y.len();
    let s = ev.expected[i];
    let mut g = vec![0.0; ev.expected.len()];
    let mut yn = vec![0.0; dim];
    let mut phi = |st: &mut Stepper, hs: f64, out: &mut Vec<f64>| -> f64 {
        if hs == 0.0 {
            out.copy_from_slice(y);
        } else {
            f(t, y, &mut st.k[0]);
            st.step(f, t, y, hs, out, opts);
        }
        (ev.eval)(out, &mut g);
        g[i] * s
    };
    let (mut lo, mut hi) = (a, b);
    let mut flo = phi(st, lo, &mut yn);
    if flo <= 0.0 && lo > 0.0 {
        // dense scan and re-stepping disagree near the bracket: widen it
        lo = 0.0;
        flo = phi(st, lo, &mut yn);
    }
    if flo <= 0.0 {
        if !from_start && flo < -opts.event_tol {
            return Ok((0.0, y.to_vec()));
        }
        // the start sits on the interface: treat it as the correct side
        flo = opts.event_tol.max(1e-300);
    }
    let mut fhi = phi(st, hi, &mut yn);
    let width = hi - lo;
    let mut widen = 0;
    while fhi > opts.event_tol && widen < 4 {
        hi += width;
        fhi = phi(st, hi, &mut yn);
        widen += 1;
    }
    if fhi.abs() <= opts.event_tol {
        return Ok((hi, yn));
    }
    let mut side = 0i32;
    for _ in 0..200 {
        let mut m = (lo * fhi - hi * flo) / (fhi - flo);
        if !(m > lo && m < hi) {
            m = 0.5 * (lo + hi);
        }
        let fm = phi(st, m, &mut yn);
        if fm.abs() <= opts.event_tol || hi - lo < 1e-15 * (1.0 + t.abs()) {
            return Ok((m, yn));
        }
        if fm > 0.0 {
            lo = m;
            flo = fm;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = m;
            fhi = fm;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    let m = 0.5 * (lo + hi);
    phi(st, m, &mut yn);
    Ok((m, yn))
}

/// Composite Gauss–Legendre (5 nodes per step) quadrature of `g(y(t))` over
/// the dense output.
pub fn quadrature<G: FnMut(&[f64]) -> f64>(dense: &DenseSolution, mut g: G) -> f64 {
    const X: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683_1,
        0.0,
        0.538_469_310_105_683_1,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];
    let mut acc = 0.0;
    let mut buf = vec![0.0; dense.dim];
    for s in &dense.steps {
        for (x, w) in X.iter().zip(W) {
            s.eval_into(s.t0 + 0.5 * s.h * (1.0 + x), &mut buf);
            acc += 0.5 * s.h * w * g(&buf);
        }
    }
    acc
}
