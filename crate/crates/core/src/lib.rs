//! Branching Hamiltonian dynamics and semiclassical trace amplitudes for
//! Schrödinger operators `-h^2 Δ + V` whose potential has a conormal
//! singularity across a hypersurface.

pub mod branchflow;
pub mod cli;
pub mod error;
pub mod jet;
pub mod ode;
pub mod orbits;
pub mod potential;
pub mod quantum;
pub mod semiclassics;
pub mod variational;

pub use error::{Error, Result};
