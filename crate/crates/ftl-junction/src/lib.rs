//! Follow-the-leader traffic through a junction with one incoming road and
//! several outgoing roads.
//!
//! [`model`] holds vehicle types and velocity laws, [`micro_sim`] integrates
//! the particle system, [`homog`] computes the effective Hamiltonians,
//! [`limiter`] estimates the junction flux limiter and [`macro_solver`]
//! solves the limiting Hamilton-Jacobi problem on the junction.

pub mod error;
pub mod homog;
pub mod limiter;
pub mod macro_solver;
pub mod micro_sim;
pub mod model;
pub mod seeds;
pub mod stats;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
