//! Mediation-analysis toolkit for discrete data: direct/indirect effect
//! identification, weak-equivalence checks between adjustment sets,
//! estimator variances, and a seeded Monte Carlo harness.

pub mod distribution;
pub mod effects;
pub mod equivalence;
mod error;
pub mod gaussian;
pub mod graph;
pub mod io;
pub mod simulation;
pub mod variance;

pub use error::{MediationError, Result};
