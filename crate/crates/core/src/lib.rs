//! Steering affine drift-free control systems `x' = sum_i u_i X_i(x)` with
//! piecewise-constant inputs.
//!
//! Planning picks a curve between the endpoints and expresses its velocity
//! over the Hall basis fields (fictitious inputs). It then integrates
//! the differential equation for the Hall coordinates and realizes the
//! resulting group element with commutator schedules on the real inputs.

pub mod cfs;
pub mod cli;
pub mod error;
pub mod free_lie;
pub mod linalg;
pub mod poly;
pub mod rational;
pub mod sim;
pub mod synth;
pub mod systems;
pub mod vfield;

pub use error::{Error, Result};
