//! Simulation and numerical verification for two-species exclusion
//! processes with exchange, creation and annihilation.
//!
//! Spins take values in `{-1, 0, +1}` on a discrete torus or free-boundary
//! box. The crate provides the microscopic dynamics and an exact kinetic
//! Monte Carlo engine, the invariant product measures, finite-volume
//! generators with their spectral gaps, estimators of the diffusion
//! coefficient, an explicit solver for the macroscopic equation, and an
//! experiment harness tying these together.

pub mod diffusion;
pub mod error;
pub mod harness;
pub mod hyperplane;
pub mod kmc;
pub mod lattice;
pub mod linalg;
pub mod measures;
pub mod pde;
pub mod process;
pub mod spectral;

pub use error::{Error, Result};
pub use lattice::{BlockShape, DirectedBond, TorusGeometry};
pub use process::{CaseTag, Configuration, RateSet};
