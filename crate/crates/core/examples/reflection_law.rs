//! Reflection off a conormal singularity: the scattering oracle against
//! i^k0 J h^k0 / (2 xi)^(k0 + 2).

use conormal_trace::potential::{builtin, ModelParams};
use conormal_trace::quantum::scattering_reflection_1d;
use conormal_trace::semiclassics::reflection_coefficient_from;

fn main() -> conormal_trace::Result<()> {
    for k0 in [2, 3] {
        let m = builtin("kink1d", &ModelParams { k0, ..ModelParams::default() })?;
        let jump = m.jump(&[0.0], &[1.0])?;
        println!("V = x_+^{k0} ... (k0 = {k0}, J = {jump})");
        for h in [0.2, 0.1, 0.05, 0.025] {
            let s = scattering_reflection_1d(&m, 1.0, h)?;
            let lead = reflection_coefficient_from(k0, jump, 1.0) * h.powi(k0 as i32);
            println!(
                "  h = {h:<6} r = {:+.4e}{:+.4e}i  leading {:+.4e}{:+.4e}i  |r/lead| = {:.5}  R + T - 1 = {:.1e}",
                s.r.re,
                s.r.im,
                lead.re,
                lead.im,
                s.r.norm() / lead.norm(),
                s.reflection + s.transmission - 1.0
            );
        }
    }
    Ok(())
}
