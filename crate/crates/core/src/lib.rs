//! Numerical machinery for local-symmetry correlators of interacting
//! few-body quantum systems in one dimension.
//!
//! The crate provides uniform grids with grid-exact symmetry maps,
//! locally symmetric potentials, stationary single-particle states with
//! their invariant two-point currents, exact few-body dynamics,
//! reduced density matrices with natural-orbital and anomalous
//! (complex-symmetric) decompositions, correlator equations of motion
//! with collision-integral decompositions, mean-field special cases,
//! and a scenario runner that emits machine-readable residual reports.
//!
//! Atomic units (m = hbar = 1) throughout.

// pub mod correlators;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod manybody;
// pub mod meanfield;
pub mod potentials;
pub mod rdm;
// pub mod report;
// pub mod scenario;
pub mod stationary;

pub use error::{Error, Result};
pub use grid::{Field1, Grid1D, IndexRange, Kernel2, Sigma, SymmetryMap};

/// Complex scalar used across the crate.
pub type C64 = num_complex::Complex64;
