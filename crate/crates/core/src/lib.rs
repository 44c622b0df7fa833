//! Monte Carlo simulation of fault-tolerant storage and gates on the seven-qubit Steane code.

pub mod analysis;
pub mod circuit;
pub mod codebook;
pub mod engine;
pub mod error;
pub mod noise;
pub mod pauli;
pub mod report;
pub mod selftest;

pub use error::{Error, Result};
