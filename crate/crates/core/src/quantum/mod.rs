//! One-dimensional quantum oracle: finite-difference spectra, smoothed
//! densities of states, and stationary scattering.

mod eigen;
mod scattering;
mod trace;

pub use eigen::{auto_domain, eigensolve_1d, eigensolve_1d_tol, AGMON, DRIFT_TOL, Domain, SpectrumResult, Tridiagonal, GRID_UNIT};
pub use scattering::{BOUNDARY_FRACTION, scattering_reflection_1d, ScatteringResult};
pub use trace::{g_rho_quantum, theta, QuantumTrace, CONVENTION_TOL};

use crate::error::Result;
use crate::potential::PotentialModel;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct CacheKey<'a> {
    model: &'a PotentialModel,
    h: f64,
    domain: Option<Domain>,
    grid_n: usize,
    window: (f64, f64),
}

/// Content hash of everything that determines a spectrum.
pub fn spectrum_key(model: &PotentialModel, h: f64, domain: Option<Domain>, grid_n: usize, window: (f64, f64)) -> String {
    let key = CacheKey { model, h, domain, grid_n, window };
    let bytes = serde_json::to_vec(&key).expect("cache key serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("spectrum_{key}.csv"))
}

fn write_spectrum(path: &Path, s: &SpectrumResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "E", "drift", "h", "grid_n", "left", "right", "window_lo", "window_hi"])?;
    let f = |x: f64| format!("{x:.16e}");
    for (i, (e, d)) in s.eigenvalues.iter().zip(&s.drift).enumerate() {
        w.write_record([
            (s.first_index + i).to_string(),
            f(*e),
            f(*d),
            f(s.h),
            s.grid_n.to_string(),
            f(s.domain.left),
            f(s.domain.right),
            f(s.window.0),
            f(s.window.1),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn read_spectrum(path: &Path, h: f64, window: (f64, f64)) -> Result<SpectrumResult> {
    let mut r = csv::Reader::from_path(path)?;
    let mut s = SpectrumResult {
        h,
        domain: Domain { left: 0.0, right: 0.0 },
        grid_n: 0,
        window,
        first_index: 0,
        eigenvalues: Vec::new(),
        drift: Vec::new(),
    };
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|e| crate::Error::Io(format!("bad cache entry: {e}")))
        };
        if i == 0 {
            s.first_index = rec[0].parse().unwrap_or(0);
            s.grid_n = rec[4].parse().unwrap_or(0);
            s.domain = Domain { left: num(5)?, right: num(6)? };
        }
        s.eigenvalues.push(num(1)?);
        s.drift.push(num(2)?);
    }
    Ok(s)
}

/// `eigensolve_1d` behind a CSV cache in `dir` keyed by the content hash.
/// Returns the spectrum and whether it came from the cache.
pub fn cached_eigensolve(
    dir: &Path,
    model: &PotentialModel,
    h: f64,
    domain: Option<Domain>,
    grid_n: usize,
    window: (f64, f64),
) -> Result<(SpectrumResult, bool)> {
    let key = spectrum_key(model, h, domain, grid_n, window);
    let path = cache_path(dir, &key);
    if path.exists() {
        if let Ok(s) = read_spectrum(&path, h, window) {
            return Ok((s, true));
        }
    }
    let s = eigensolve_1d(model, h, domain, grid_n, window)?;
    std::fs::create_dir_all(dir)?;
    write_spectrum(&path, &s)?;
    Ok((s, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{builtin, ModelParams};

    #[test]
    fn cache_round_trip_and_invalidation() {
        let dir = tempfile::tempdir().unwrap();
        let m = builtin("harmonic", &ModelParams::default()).unwrap();
        let (a, hit_a) = cached_eigensolve(dir.path(), &m, 0.1, None, 200, (0.0, 0.5)).unwrap();
        let (b, hit_b) = cached_eigensolve(dir.path(), &m, 0.1, None, 200, (0.0, 0.5)).unwrap();
        assert!(!hit_a && hit_b);
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.domain, b.domain);
        let (_, hit_c) = cached_eigensolve(dir.path(), &m, 0.05, None, 200, (0.0, 0.5)).unwrap();
        assert!(!hit_c);
    }
}
