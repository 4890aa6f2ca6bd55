//! Approximate logic synthesis for And-Inverter Graphs under a maximum-error bound.
//!
//! Candidate local changes are bounded from below by bit-parallel simulation,
//! pruned, sorted, and then certified one by one with a SAT-based error miter.

pub mod aig;
pub mod checker;
pub mod cli;
pub mod cpm;
pub mod error;
pub mod flow;
pub mod lac;
pub mod metrics;
pub mod sim;
pub mod testbench;

pub use error::{Error, Result};
