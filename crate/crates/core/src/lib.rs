//! Sparse spiked matrix estimation: scalar channels, replica-symmetric
//! potentials, variational solvers, phase-transition scans and exact
//! small-n verification.

// validation uses `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod error;
pub mod numeric;
pub mod oracle;
pub mod phase;
pub mod potential;
pub mod prior;
pub mod quadrature;
pub mod varsolve;

pub use error::{Error, Result};
pub use prior::Prior;
