//! Hamilton flow that reflects or transmits at each interface crossing.

use conormal_trace::branchflow::{branch_flowout, flow_with_itinerary, BranchChoice::*, FlowConfig, PhasePoint};
use conormal_trace::potential::{builtin, ModelParams};

fn main() -> conormal_trace::Result<()> {
    let cfg = FlowConfig::default();
    let tub = builtin("bathtub1d", &ModelParams::default())?;
    let p = PhasePoint::new(vec![0.0], vec![1.0]);

    let tr = flow_with_itinerary(&tub, &p, &[Reflect, Reflect], 2.0, &cfg)?;
    for ev in &tr.events {
        println!("t = {:.6}  {:?} at y = {:?}, xi_N = {:.6}", ev.t(), ev.choice, ev.hit.y, ev.hit.xi_n);
    }
    println!("back at x = {:.2e} with xi = {:.12} after T = 2", tr.final_point.x[0], tr.final_point.xi[0]);

    println!("\nall branches up to two reflections over t = 3:");
    for (q, it) in branch_flowout(&tub, &p, 3.0, 2, &cfg)? {
        let word: String = it.choices.iter().map(|c| if *c == Reflect { 'R' } else { 'T' }).collect();
        println!("  {word:<6} x = {:+.6}  xi = {:+.6}", q.x[0], q.xi[0]);
    }

    let ell = builtin("elliptic-bathtub-2d", &ModelParams { dimension: 2, ..ModelParams::default() })?;
    let q = PhasePoint::new(vec![0.1, 0.2], vec![0.7, -0.5]);
    let tr = flow_with_itinerary(&ell, &q, &[Reflect, Transmit, Reflect, Reflect], 4.0, &cfg)?;
    println!("\nelliptic bathtub: {} events, energy drift {:.1e}", tr.events.len(), tr.max_energy_drift(&ell));
    Ok(())
}
