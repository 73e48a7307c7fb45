//! Closed orbits by itinerary: the length spectrum and an orbit cylinder.

use conormal_trace::orbits::{continue_cylinder, length_spectrum, OrbitOptions};
use conormal_trace::potential::{builtin, ModelParams};

fn main() -> conormal_trace::Result<()> {
    let opts = OrbitOptions::default();
    for (name, dim, l_max) in [("bathtub1d", 1, 5.5), ("elliptic-bathtub-2d", 2, 5.0)] {
        let m = builtin(name, &ModelParams { dimension: dim, ..ModelParams::default() })?;
        let spec = length_spectrum(&m, &[1.0], l_max, 2, &opts)?;
        println!("{name}, E = 1:");
        println!("  {:>9} {:>3} {:>6} {:>10} {:>5} {:>12}", "T", "N", "word", "S", "sigma", "det(I-P)");
        for e in &spec.entries {
            let o = &e.orbit;
            let word: String = o.itinerary.iter().map(|c| format!("{c:?}").chars().next().unwrap()).collect();
            let det = o.poincare.as_ref().map_or("degenerate".to_string(), |p| format!("{:.6}", p.route_poly));
            let sigma = o.morse_index.map_or("-".to_string(), |s| s.to_string());
            println!("  {:>9.6} {:>3} {:>6} {:>10.6} {:>5} {:>12}", e.period, e.reflections, word, o.action, sigma, det);
        }
    }

    let tub = builtin("bathtub1d", &ModelParams::default())?;
    let spec = length_spectrum(&tub, &[1.0], 2.5, 2, &opts)?;
    let bounce = spec.entries.iter().find(|e| (e.period - 2.0).abs() < 1e-6).unwrap();
    let cyl = continue_cylinder(&tub, &bounce.orbit, (0.8, 1.2), 9, &opts)?;
    println!("\nbounce cylinder, T(E) = 2/sqrt(E):");
    for o in &cyl.orbits {
        println!("  E = {:.3}  T = {:.9}  2/sqrt(E) = {:.9}", o.energy, o.period, 2.0 / o.energy.sqrt());
    }
    println!("Hamilton-Jacobi defect {:.1e}", cyl.hamilton_jacobi_defect());
    Ok(())
}
