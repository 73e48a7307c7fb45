use super::eigen::SpectrumResult;
use crate::error::{Error, Result};
use crate::semiclassics::SpectralWindow;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

/// Agreement required between the spectral sum and the Fourier-side
/// quadrature, relative to the `l^1` size of the sum.
pub const CONVENTION_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct QuantumTrace {
    pub h: f64,
    pub energies: Vec<f64>,
    /// `sum_j chi(E_j) rho((E - E_j)/h)`.
    pub g_direct: Vec<Complex64>,
    /// `(1/2pi) int rho_hat(t) Theta(t) e^{iEt/h} dt`.
    pub g_fourier: Vec<Complex64>,
    /// `sum_j chi(E_j) |rho((E - E_j)/h)|`, the scale of the cancellation.
    pub l1: Vec<f64>,
    pub mismatch: f64,
}

/// `Theta(t) = sum_j chi(E_j) e^{-itE_j/h}`.
pub fn theta(spectrum: &SpectrumResult, window: &SpectralWindow, t: f64) -> Complex64 {
    spectrum
        .eigenvalues
        .iter()
        .map(|&e| window.chi(e) * Complex64::from_polar(1.0, -t * e / spectrum.h))
        .sum()
}

/// Both expressions of the smoothed density at each energy; fails with
/// `ConventionMismatch` when they disagree.
pub fn g_rho_quantum(spectrum: &SpectrumResult, window: &SpectralWindow, energies: &[f64]) -> Result<QuantumTrace> {
    let h = spectrum.h;
    let levels: Vec<(f64, f64)> = spectrum
        .eigenvalues
        .iter()
        .map(|&e| (e, window.chi(e)))
        .filter(|(_, c)| *c != 0.0)
        .collect();
    let decay = window.rho_decay(1e-13);
    let rows: Vec<(Complex64, Complex64, f64)> = energies
        .par_iter()
        .map(|&e| {
            let mut direct = Complex64::new(0.0, 0.0);
            let mut l1 = 0.0;
            let mut s_max: f64 = 0.0;
            for &(ej, c) in &levels {
                let s = (e - ej) / h;
                let r = window.rho(s);
                direct += c * r;
                l1 += c * r.norm();
                s_max = s_max.max(s.abs());
            }
            // trapezoid in t: exact up to aliasing for smooth compactly
            // supported rho_hat
            let (ts, dt) = window.time_nodes(s_max, decay);
            let mut fourier = Complex64::new(0.0, 0.0);
            for &t in &ts {
                let w = window.rho_hat(t);
                if w == 0.0 {
                    continue;
                }
                let th: Complex64 = levels
                    .iter()
                    .map(|&(ej, c)| Complex64::from_polar(c, t * (e - ej) / h))
                    .sum();
                fourier += w * th;
            }
            fourier *= dt / (2.0 * PI);
            (direct, fourier, l1)
        })
        .collect();
    let mismatch = rows
        .iter()
        .map(|(d, f, l1)| (d - f).norm() / d.norm().max(*l1).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let trace = QuantumTrace {
        h,
        energies: energies.to_vec(),
        g_direct: rows.iter().map(|r| r.0).collect(),
        g_fourier: rows.iter().map(|r| r.1).collect(),
        l1: rows.iter().map(|r| r.2).collect(),
        mismatch,
    };
    if levels.is_empty() {
        return Ok(trace);
    }
    if mismatch > CONVENTION_TOL {
        return Err(Error::ConventionMismatch { relative: mismatch });
    }
    Ok(trace)
}

impl QuantumTrace {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["E", "h", "direct_re", "direct_im", "fourier_re", "fourier_im", "abs", "l1"])?;
        let f = |x: f64| format!("{x:.16e}");
        for i in 0..self.energies.len() {
            let d = self.g_direct[i];
            let q = self.g_fourier[i];
            out.write_record([
                f(self.energies[i]),
                f(self.h),
                f(d.re),
                f(d.im),
                f(q.re),
                f(q.im),
                f(d.norm()),
                f(self.l1[i]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::eigen::Domain;
    use crate::semiclassics::Cutoff;

    fn fake(eigs: Vec<f64>, h: f64) -> SpectrumResult {
        SpectrumResult {
            h,
            domain: Domain { left: 0.0, right: 1.0 },
            grid_n: 0,
            window: (0.0, 2.0),
            first_index: 0,
            drift: vec![0.0; eigs.len()],
            eigenvalues: eigs,
        }
    }

    #[test]
    fn single_level() {
        let w = SpectralWindow::bumps(1.0, 0.5, 2.0, 0.3);
        let s = fake(vec![1.02], 0.05);
        let es = [0.95, 1.0, 1.1];
        let q = g_rho_quantum(&s, &w, &es).unwrap();
        for (e, g) in es.iter().zip(&q.g_direct) {
            assert!((g - w.rho((e - 1.02) / 0.05)).norm() < 1e-15);
        }
        assert!(q.mismatch < 1e-9);
    }

    #[test]
    fn empty_window() {
        let w = SpectralWindow::bumps(1.0, 0.2, 2.0, 0.3);
        let q = g_rho_quantum(&fake(vec![3.0], 0.01), &w, &[1.0]).unwrap();
        assert_eq!(q.g_direct[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn mirrored_time_window_conjugates() {
        let w = SpectralWindow::new(Cutoff::gaussian(1.0, 0.2), Cutoff::gaussian(2.0, 0.05));
        let m = SpectralWindow::new(w.chi, w.rho_hat.mirrored());
        let s = fake((0..40).map(|j| 0.6 + 0.021 * j as f64).collect(), 0.01);
        let a = g_rho_quantum(&s, &w, &[1.0]).unwrap();
        let b = g_rho_quantum(&s, &m, &[1.0]).unwrap();
        assert!((a.g_direct[0] - b.g_direct[0].conj()).norm() < 1e-12 * a.l1[0]);
    }
}
