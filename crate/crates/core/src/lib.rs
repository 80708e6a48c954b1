//! Two-dimensional TM finite-difference time-domain solver with stable,
//! energy-conserving embedded fine blocks.

pub mod analysis;
pub mod coupling;
pub mod error;
pub mod interpolation;
pub mod operators;
pub mod scenario;
pub mod solver;
pub mod sparse;
pub mod topology;

pub use error::{Error, Result};
