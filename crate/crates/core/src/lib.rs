//! Monte Carlo laboratory for diffusions in stationary random environments.
//!
//! The crate is organized in four layers:
//!
//! * [`env`] — seeded, stationary, finite-range-dependent coefficient fields
//!   `(a(x, ω), b(x, ω))` built from jittered-lattice bump superpositions, in
//!   four families (generic bump perturbation, divergence-free drift,
//!   gradient drift, and a deterministic singleton family for oracles).
//! * [`sde`] — Euler–Maruyama path simulation with Brownian-bridge exit
//!   correction, slab/box/ball stopping geometry, occupation-time
//!   accumulation, and deterministic parallel batch drivers.
//! * [`estimators`] — turns path batches into statistics: exit-probability
//!   decay scans, velocity and covariance snapshots, occupation densities,
//!   auxiliary coefficient fields, two-sample exit-law tests, drift-margin
//!   checks, supermartingale verification, and tail scans.
//! * [`analysis`] — closed-form companions used as oracles: the alpha
//!   coefficients and piecewise test function, and the one-dimensional
//!   scale-function exit-probability oracle.
//!
//! Everything downstream of a seed is bit-reproducible: batches are pure
//! functions of `(inputs, master seed)` regardless of worker count.

pub mod analysis;
pub mod env;
pub mod error;
pub mod estimators;
pub mod kernel;
pub mod linalg;
pub mod report;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
