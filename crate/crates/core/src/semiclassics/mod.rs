//! Reflection coefficients and trace amplitudes of orbit cylinders.
//!
//! Predictions include both time orientations of each orbit; the reversed
//! orbit contributes the complex conjugate amplitude at `-T`.

mod amplitude;
mod window;

pub use amplitude::{
    g_rho_predicted, orbit_reflection_product, reflection_coefficient, reflection_coefficient_from,
    reflection_coefficient_on_shell, trace_amplitude, PredictionRow, TracePrediction,
};
pub use window::{Cutoff, Profile, SpectralWindow, GAUSS_CUT};
