//! Sensitivity analysis of post-selected linear-optical devices.
//!
//! A device is an ordered chain of unitary components `u_j = exp(-i θ_j H_j)`
//! acting on a truncated multimode Fock space, fed by an input state and an
//! auxiliary state and post-selected on photon-counting outcomes. For every
//! component the crate computes how much information about `θ_j` survives in
//! the heralded output (the quantum Fisher information scaled by the success
//! probability), assembles the full sensitivity matrix, folds it with a cost
//! matrix into a single dimensionless figure, and bounds the worst-case
//! channel deviation of a component.
//!
//! Modules:
//!
//! - [`fock`]: Fock bases, state vectors, two-mode rotations and generators.
//! - [`circuit`]: components, circuits, post-selection, outcome tables.
//! - [`metrology`]: sensitivities, oracles, matrices, costs, diamond bound.
//! - [`catalog`]: the NS gates and enhanced Bell detectors, ready to use.
//! - [`circuit_file`]: the TOML circuit description format.

pub mod catalog;
pub mod circuit;
pub mod circuit_file;
mod error;
pub mod expr;
pub mod fock;
pub mod metrology;

pub use error::{Error, Result};
pub use num_complex::Complex64;
