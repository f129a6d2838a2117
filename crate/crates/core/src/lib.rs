//! Semiclassical surface-hopping solvers for two-band avoided crossings.
//!
//! A coupled Wigner-matrix Liouville system is solved near the crossing and the
//! decoupled band Liouville equations away from it; a time-splitting spectral
//! Schrödinger solver provides the reference.

pub mod error;
pub mod grid;
pub mod harness;
pub mod hybrid;
pub mod linalg;
pub mod liouville;
pub mod observables;
pub mod phase_space;
pub mod potentials;
pub mod schrodinger;

pub use error::{Error, Result};
