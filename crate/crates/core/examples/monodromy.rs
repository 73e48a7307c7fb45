//! Linearized flow across reflections, the two Poincaré routes, the Morse
//! index and the Van Vleck composition law.

use conormal_trace::branchflow::{flow_with_itinerary, BranchChoice::*, FlowConfig, PhasePoint};
use conormal_trace::orbits::{length_spectrum, OrbitOptions};
use conormal_trace::potential::{builtin, ModelParams};
use conormal_trace::variational::{action_hessian_blocks, integrate_monodromy, van_vleck_split};

fn main() -> conormal_trace::Result<()> {
    let cfg = FlowConfig::default();
    let tub = builtin("bathtub1d", &ModelParams::default())?;
    let tr = flow_with_itinerary(&tub, &PhasePoint::new(vec![0.0], vec![1.0]), &[Reflect, Reflect], 2.0, &cfg)?;
    let mono = integrate_monodromy(&tub, &tr, &cfg)?;
    println!("bounce monodromy {}", mono.matrix);
    let hb = action_hessian_blocks(&mono.matrix)?;
    println!("action Hessian blocks: A = {:.4}, B = {:.4}, C = {:.4}", hb.a[(0, 0)], hb.b[(0, 0)], hb.c[(0, 0)]);

    let ell = builtin("elliptic-bathtub-2d", &ModelParams { dimension: 2, ..ModelParams::default() })?;
    let spec = length_spectrum(&ell, &[1.0], 5.5, 2, &OrbitOptions::default())?;
    println!("\nelliptic bathtub orbits:");
    for e in spec.entries.iter().filter(|e| !e.orbit.degenerate) {
        let o = &e.orbit;
        println!(
            "  T = {:.6}  routes {:+.8} / {:?}  sigma = {:?} (Hessian {:?} + conjugate {})",
            o.period, o.poincare_routes.0, o.poincare_routes.1, o.morse_index, o.hessian_index, o.conjugate_count
        );
    }

    let tr = flow_with_itinerary(&tub, &PhasePoint::new(vec![0.2], vec![0.9]), &[Reflect], 1.3, &cfg)?;
    for cut in [0.3, 0.7, 1.0] {
        println!("Van Vleck residual, cut at t = {cut}: {:.2e}", van_vleck_split(&tub, &tr, cut, &cfg)?);
    }
    Ok(())
}
