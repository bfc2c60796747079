//! Numerical laboratory for the kinetic Cucker–Smale equation with
//! spatially local alignment,
//!
//! `∂t f + v·∇x f = γ ∇v·(E[f] f)`, `E[f] = ρ v − m`.
//!
//! The crate provides the phase-space grid and observables, the closed-form
//! homogeneous solution, a splitting solver, a characteristics/Picard
//! oracle, a particle comparator, the mono-kinetic reduction and scattering
//! diagnostics, plus the file formats and configuration used by the CLI.

pub mod characteristics;
pub mod cli_io;
pub mod error;
pub mod homogeneous;
pub mod monokinetic;
pub mod particles;
pub mod phasegrid;
pub mod remap;
pub mod scattering;
pub mod solver;

pub use error::{KineticError, Result};
