//! NOMA power allocation and interference management for visible-light
//! access networks.
//!
//! * [`channel`]: Lambertian line-of-sight gains.
//! * [`noma`]: achievable rates under imperfect SIC and the cumulative-power
//!   reparametrization.
//! * [`optimizer`]: gradient-projection solvers for the max-sum and max-min
//!   criteria, plus a grid oracle.
//! * [`network`]: frequency-reuse-2 grids, coverage classes and user assignment.
//! * [`experiment`]: configuration and deterministic Monte Carlo runners.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod channel;
pub mod error;
pub mod experiment;
pub mod network;
pub mod noma;
pub mod optimizer;

pub use error::{Error, Result};
