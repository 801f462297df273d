//! Pulse synthesis for the gate set {H, S, T_π/8, CNOT}.
//!
//! * [`grape`]: gradient ascent on piecewise-constant controls for closed
//!   dynamics;
//! * [`lindblad`]: the same ascent on the channel superoperator of a
//!   Lindblad master equation;
//! * [`slc`]: sampling-based learning control, training one schedule on a
//!   grid of uncertainty samples and testing it on random draws;
//! * [`cli`]: configuration files, experiment presets and artifact writers
//!   behind the `robust-gates` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod grape;
pub mod linalg;
pub mod lindblad;
pub mod model;
pub mod parallel;
pub mod pulse;
pub mod slc;

pub use error::{Error, Result};
