//! Multiclass sparse discriminant analysis.
//!
//! Estimates all `K - 1` discriminant directions of a Gaussian
//! linear-discriminant model at once by minimizing a quadratic loss with a
//! group-lasso penalty that couples each feature's coefficients across
//! classes. The solver is blockwise coordinate descent with warm-started
//! regularization paths, active-set iteration and a KKT optimality
//! certificate. On top of the solver sit the projected LDA classifier,
//! F-test screening, Fisher-direction recovery, cross-validation, a
//! simulation benchmark harness, and checks of the binary-case equivalence
//! with the ROAD and DSDA estimators.

pub mod classify;
pub mod data;
mod eigen;
pub mod equivalence;
pub mod modelsel;
pub mod pipeline;
pub mod simbench;
pub mod solver;
pub mod stats;

mod error;

pub use error::{Error, Result};
