//! Spectral numerics laboratory.
//!
//! Implements and cross-checks a chain of spectral identities on separable
//! (box and torus-interval) spectra:
//!
//! * [`riesz`]: transverse reduction constants of Riesz operators, the
//!   critical exponent and the mollified restriction limit;
//! * [`spectrum`]: eigenvalue enumeration with certified heat-weighted tails;
//! * [`heattrace`]: regulated traces, mixed-cell heat traces and finite-part
//!   extraction by weighted least squares;
//! * [`stochastic`]: the heat-regularized Gaussian source and Monte Carlo
//!   checks of its quadratic-form identity;
//! * [`boxint`]: aspect-ratio box integrals by three independent methods and
//!   the log-concavity chain behind their monotonicity;
//! * [`plates`]: the scalar parallel-plate pipeline and the comparison
//!   coefficient;
//! * [`harness`] and [`verify`]: configuration, reports and the acceptance
//!   checks driven by the `speclab` binary.

// `!(x > y)` comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boxint;
pub mod error;
pub mod harness;
pub mod heattrace;
pub mod mc;
pub mod plates;
pub mod quad;
pub mod riesz;
pub mod specfun;
pub mod spectrum;
pub mod stochastic;
pub mod verify;

mod sum;

pub use error::{Error, Result};
