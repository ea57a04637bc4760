//! Consistent estimation of confounding strength in high-dimensional
//! linear-Gaussian causal models.

// NaN inputs must fail validation, so checks are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod model;
pub mod oracles;
pub mod quad;
pub mod roots;
pub mod spectral;

pub use error::{Error, Result};
