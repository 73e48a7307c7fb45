//! Built-in models, the jump of the k0-th normal derivative, and a custom
//! piecewise polynomial.

use conormal_trace::potential::{builtin, builtin_models, piecewise_polynomial_1d, ModelParams};

fn main() -> conormal_trace::Result<()> {
    for m in builtin_models() {
        let jumps: Vec<String> = m
            .interfaces
            .iter()
            .enumerate()
            .map(|(i, itf)| {
                let y = itf.sample_points(m.dimension, 1).swap_remove(0);
                let nu = itf.unit_normal(&y);
                format!("J = {:.3} at {y:?}", m.jump_on(i, &y, &nu).unwrap())
            })
            .collect();
        println!("{:<22} dim {} k0 {}  {}", m.name, m.dimension, m.k0, jumps.join(", "));
    }

    // a kink of order three: V = 1.5 x_+^3 / 3!
    let cubic = builtin("kink1d", &ModelParams { k0: 3, coefficient: 1.5, ..ModelParams::default() })?;
    println!("\nkink1d k0 = 3: V(0.5) = {:.6}, J = {}", cubic.eval_potential(&[0.5]), cubic.jump(&[0.0], &[1.0])?);

    // stiffness jump at the origin: x^2/4 on the left, 3x^2/4 on the right
    let kinked = piecewise_polynomial_1d(0.0, vec![0.0, 0.0, 0.25], vec![0.0, 0.0, 0.75], 2)?;
    for x in [-1.0, 0.0, 1.0] {
        println!("kinked oscillator V({x:+}) = {}", kinked.eval_potential(&[x]));
    }
    println!("jump seen from the left {}, from the right {}", kinked.jump(&[0.0], &[1.0])?, kinked.jump(&[0.0], &[-1.0])?);
    Ok(())
}
