//! Filtered output entanglement, teleportation fidelity and EPR steering of a
//! two-mode optomechanical cavity under cold-damping feedback.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod model;
pub mod spectra;

pub use error::{Error, Result};
