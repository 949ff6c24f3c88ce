//! Exponential sums twisted by trace functions modulo composite `q = q0 q1`.

pub mod cli;
pub mod coefficients;
pub mod correlation;
pub mod error;
pub mod experiments;
pub mod par;
pub mod spectral;
pub mod trace;
pub mod zmod;

pub use error::{Error, Result};
