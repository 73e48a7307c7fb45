use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Shape of a compactly supported cutoff on `[center - w, center + w]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `exp(1 - 1/(1 - u^2))`, peak 1.
    Bump,
    /// Identically 1 on `|u| <= 1/2`, bump-built transition to 0 at `|u| = 1`.
    PlateauBump,
    /// `exp(-(GAUSS_CUT u)^2 / 2)`, cut where it drops below machine
    /// epsilon. Fourier tails are Gaussian rather than root-exponential.
    Gaussian,
}

/// Number of standard deviations in a Gaussian half-width.
pub const GAUSS_CUT: f64 = 8.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub center: f64,
    pub half_width: f64,
    pub profile: Profile,
}

fn smooth_step(x: f64) -> f64 {
    // 0 for x <= 0, 1 for x >= 1
    let g = |r: f64| if r > 0.0 { (-1.0 / r).exp() } else { 0.0 };
    let a = g(x);
    let b = g(1.0 - x);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

impl Cutoff {
    pub fn new(center: f64, half_width: f64, profile: Profile) -> Self {
        Cutoff { center, half_width, profile }
    }

    /// Gaussian cutoff with standard deviation `sigma`.
    pub fn gaussian(center: f64, sigma: f64) -> Self {
        Cutoff::new(center, GAUSS_CUT * sigma, Profile::Gaussian)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    pub fn contains(&self, s: f64) -> bool {
        (s - self.center).abs() < self.half_width
    }

    pub fn eval(&self, s: f64) -> f64 {
        let u = (s - self.center) / self.half_width;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        match self.profile {
            Profile::Bump => (1.0 - 1.0 / (1.0 - u * u)).exp(),
            Profile::PlateauBump => smooth_step(2.0 * (1.0 - u.abs())),
            Profile::Gaussian => (-0.5 * (GAUSS_CUT * u).powi(2)).exp(),
        }
    }

    pub fn mirrored(&self) -> Self {
        Cutoff { center: -self.center, ..*self }
    }
}

fn gl_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(24.try_into().unwrap())
            .as_node_weight_pairs()
            .to_vec()
    })
}

/// `chi` in energy, `rho_hat` in time, and `rho(s) = (1/2pi) int rho_hat(t) e^{ist} dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub chi: Cutoff,
    pub rho_hat: Cutoff,
}

impl SpectralWindow {
    pub fn new(chi: Cutoff, rho_hat: Cutoff) -> Self {
        SpectralWindow { chi, rho_hat }
    }

    /// Plateau bump in energy and bump in time.
    pub fn bumps(e0: f64, delta_e: f64, t0: f64, delta_t: f64) -> Self {
        SpectralWindow::new(
            Cutoff::new(e0, delta_e, Profile::PlateauBump),
            Cutoff::new(t0, delta_t, Profile::Bump),
        )
    }

    pub fn chi(&self, e: f64) -> f64 {
        self.chi.eval(e)
    }

    pub fn rho_hat(&self, t: f64) -> f64 {
        self.rho_hat.eval(t)
    }

    /// Composite Gauss–Legendre over the support of `rho_hat`, with about
    /// one oscillation per panel.
    pub fn rho(&self, s: f64) -> Complex64 {
        let (a, b) = self.rho_hat.support();
        let panels = 8 + (s.abs() * (b - a) / (2.0 * PI)).ceil() as usize;
        let width = (b - a) / panels as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..panels {
            let lo = a + p as f64 * width;
            for &(x, w) in gl_rule() {
                let t = lo + 0.5 * width * (x + 1.0);
                acc += Complex64::from_polar(w * 0.5 * width * self.rho_hat(t), s * t);
            }
        }
        acc / (2.0 * PI)
    }

    /// Smallest `S` (power of two times a base scale) beyond which `|rho|`
    /// stays below `tol` times its peak, capped at `1e6`. The quadrature of
    /// `rho` bottoms out near `1e-17`, so `tol` much below `1e-15` only
    /// returns the cap.
    pub fn rho_decay(&self, tol: f64) -> f64 {
        let peak = self.rho(0.0).norm().max(self.rho(self.rho_hat.center).norm());
        let mut s = 1.0 / self.rho_hat.half_width;
        while s < 1e6 {
            let worst = (0..8)
                .map(|k| {
                    let x = s * (1.0 + k as f64 / 8.0);
                    self.rho(x).norm().max(self.rho(-x).norm())
                })
                .fold(0.0, f64::max);
            if worst < tol * peak {
                return s;
            }
            s *= 2.0;
        }
        s
    }

    /// Energy interval holding every level that contributes to `g` on
    /// `energies` above `tol` relative to the peak of `rho`.
    pub fn level_window(&self, energies: &[f64], h: f64, tol: f64) -> (f64, f64) {
        let reach = h * self.rho_decay(tol);
        let (lo, hi) = self.chi.support();
        let e_lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let e_hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo.max(e_lo - reach), hi.min(e_hi + reach))
    }

    /// Recovers `rho_hat(t) = int rho(s) e^{-ist} ds` by the trapezoid rule on
    /// a grid fine enough to avoid aliasing; returns the largest error.
    pub fn round_trip_error(&self, ts: &[f64]) -> f64 {
        let (a, b) = self.rho_hat.support();
        let reach = a.abs().max(b.abs());
        let ds = PI / (2.0 * reach);
        let s_max = self.rho_decay(1e-10);
        let k = (s_max / ds).ceil() as i64;
        let samples: Vec<(f64, Complex64)> = (-k..=k)
            .map(|j| {
                let s = j as f64 * ds;
                (s, self.rho(s))
            })
            .collect();
        ts.iter()
            .map(|&t| {
                let rec: Complex64 = samples
                    .iter()
                    .map(|(s, r)| r * Complex64::from_polar(ds, -s * t))
                    .sum();
                (rec - self.rho_hat(t)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Uniform nodes on the support of `rho_hat` for the trapezoid rule,
    /// resolving frequencies up to `s_max` plus the decay range of `rho`.
    pub fn time_nodes(&self, s_max: f64, decay: f64) -> (Vec<f64>, f64) {
        let (a, b) = self.rho_hat.support();
        let band = 2.0 * s_max.abs() + decay;
        let dt_max = 2.0 * PI / band;
        let n = ((b - a) / dt_max).ceil().max(16.0) as usize;
        let dt = (b - a) / n as f64;
        ((0..=n).map(|j| a + j as f64 * dt).collect(), dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_is_one_on_middle_half() {
        let c = Cutoff::new(1.0, 0.4, Profile::PlateauBump);
        for k in 0..=20 {
            let e = 0.8 + 0.4 * k as f64 / 20.0;
            assert_eq!(c.eval(e), 1.0);
        }
        assert_eq!(c.eval(0.6), 0.0);
        assert!(c.eval(0.65) > 0.0 && c.eval(0.65) < 1.0);
    }

    #[test]
    fn gaussian_closed_form() {
        let w = SpectralWindow::new(Cutoff::gaussian(0.0, 1.0), Cutoff::gaussian(2.0, 0.1));
        let tau: f64 = 0.1;
        for s in [0.0, 3.0, 17.0, -40.0] {
            let exact = Complex64::from_polar(
                tau * (2.0 * PI).sqrt() / (2.0 * PI) * (-0.5 * tau * tau * s * s).exp(),
                2.0 * s,
            );
            assert!((w.rho(s) - exact).norm() < 1e-14, "s = {s}");
        }
    }

    #[test]
    fn round_trip_recovers_rho_hat() {
        let w = SpectralWindow::bumps(1.0, 0.3, 2.0, 0.3);
        let ts: Vec<f64> = (0..13).map(|k| 1.6 + 0.8 * k as f64 / 12.0).collect();
        assert!(w.round_trip_error(&ts) < 1e-6);
        let g = SpectralWindow::new(Cutoff::gaussian(1.0, 0.3), Cutoff::gaussian(2.0, 0.05));
        assert!(g.round_trip_error(&ts) < 1e-6);
    }
}
