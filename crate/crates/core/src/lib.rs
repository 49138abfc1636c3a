//! Accelerated stochastic approximation under state-dependent gradient noise.
//!
//! - [`geometry`]: Euclidean and `ℓp` distance-generating functions, prox steps.
//! - [`oracle`]: stochastic gradient oracles, generalized linear regression,
//!   problem constants.
//! - [`algorithms`]: SAGD and stochastic gradient extrapolation (SGE).
//! - [`multistage`]: restarted SGE under quadratic growth and SGE-SR for
//!   sparse recovery.
//! - [`harness`]: multi-trial experiments with CSV/JSON output.

pub mod algorithms;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod multistage;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};
