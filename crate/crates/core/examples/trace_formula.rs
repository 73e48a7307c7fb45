//! Semiclassical prediction against the quantum smoothed density for the
//! wall-penetrating orbit of the bathtub (period 2 + pi at E = 1).

use conormal_trace::orbits::{continue_cylinder, length_spectrum, OrbitOptions};
use conormal_trace::potential::{builtin, ModelParams};
use conormal_trace::quantum::{eigensolve_1d, g_rho_quantum};
use conormal_trace::semiclassics::{g_rho_predicted, Cutoff, SpectralWindow};
use std::f64::consts::PI;

fn main() -> conormal_trace::Result<()> {
    let tub = builtin("bathtub1d", &ModelParams::default())?;
    let opts = OrbitOptions::default();
    let spec = length_spectrum(&tub, &[1.0], 5.5, 0, &opts)?;
    let seed = &spec.entries.iter().find(|e| e.reflections == 0).unwrap().orbit;
    let cyl = continue_cylinder(&tub, seed, (0.9, 1.1), 9, &opts)?;
    let win = SpectralWindow::new(Cutoff::gaussian(1.0, 0.3), Cutoff::gaussian(2.0 + PI, 0.25));
    for h in [0.02, 0.01] {
        let pred = g_rho_predicted(std::slice::from_ref(&cyl), &win, &[1.0], &[h])?.total(1.0, h).unwrap();
        let lw = win.level_window(&[1.0], h, 1e-14);
        let s = eigensolve_1d(&tub, h, None, 0, (lw.0.max(-0.5), lw.1))?;
        let q = g_rho_quantum(&s, &win, &[1.0])?;
        let g = q.g_direct[0];
        println!(
            "h = {h}: {} levels, g_quant = {:.6}, g_pred = {:.6}, |ratio| = {:.4}, phase offset {:+.3}, direct/Fourier mismatch {:.1e}",
            s.eigenvalues.len(),
            g,
            pred,
            g.norm() / pred.norm(),
            (g / pred).arg(),
            q.mismatch
        );
    }
    Ok(())
}
