//! Vibration-based condition monitoring for round-seam milling machines.
//!
//! The toolkit follows a two-step scheme: wavelet analysis of triaxial
//! acceleration signals (continuous transforms for inspection, packet
//! decomposition and time-domain statistics for features), followed by
//! lightweight supervised classifiers (RBF support vector machines and random
//! forests). A seeded simulator generates labeled recordings for four
//! conditions: blade wear, individual blade defects, machine instability and
//! toothed-belt slack.

// NaN must fail validation, so `!(x > 0.0)` is used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod cwt;
pub mod error;
pub mod features;
pub mod pipeline;
pub mod rng;
pub mod signal;
pub mod sim;
pub mod wpd;

pub use error::{Error, Result};
