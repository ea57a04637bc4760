//! Experiment harness: grid configs, seeded replicate sweeps, CSV output
//! and oracle checks.

pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod grid;
pub mod oracle_check;

pub use error::{BenchError, Result};
