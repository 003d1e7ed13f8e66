//! Multiple-model adaptive fuzzy logic control (MM-AFLC) with offline
//! neural-network plant identification, plus a fixed-step closed-loop
//! parking simulator.
//!
//! Module map:
//!
//! - [`plant`]: the hidden second-order plant and its friction knob.
//! - [`identifier`]: 2-3-1 tanh network, offline backprop, parallel and
//!   series-parallel identification models.
//! - [`fuzzy`]: triangular memberships, product-rule firing, normalized
//!   regressor and center-average defuzzification.
//! - [`adaptation`]: reference model, certainty-equivalent gain, adaptive
//!   laws, robust term and Lyapunov bookkeeping.
//! - [`multimodel`]: the controller bank, convex-hull geometry, weight
//!   estimation and simplex projection.
//! - [`simkit`]: RK4 integration, bicycle kinematics, parking scenario,
//!   episodes, logs and metrics.
//! - [`batch`]: running many episodes at once (rayon when the `parallel`
//!   feature is on).

pub mod adaptation;
pub mod batch;
pub mod error;
pub mod fuzzy;
pub mod identifier;
pub mod multimodel;
pub mod par;
pub mod plant;
pub mod simkit;

pub use error::{Error, Result};
