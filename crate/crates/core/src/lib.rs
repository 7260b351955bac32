//! Simulation and certification of exponential ergodicity for SDEs driven by
//! additive Lévy noise, built around the refined basic coupling.
//!
//! * [`measure`]: Lévy measures with densities, overlap masses and `J(s)`.
//! * [`models`]: drift and noise catalogs, scenarios, dissipativity checks.
//! * [`coupling`]: the coupled pair `(X_t, Y_t)` and single marginals.
//! * [`certificates`]: test functions and explicit contraction constants.
//! * [`estimators`]: empirical curves, rate fits, exact lattice oracle.
//! * [`runner`]: config files, orchestration and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod certificates;
pub mod coupling;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod measure;
pub mod models;
pub mod quadrature;
pub mod runner;

pub use error::{Error, Result};
