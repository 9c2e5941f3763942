//! Spectral calculus for H = −d²/dx² − ν(ν+1)sech²x and numerical checks of the
//! dyadic multiplier estimates built on it.

pub mod calculus;
pub mod cli;
pub mod cztools;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod lpaley;
pub mod numeric;
pub mod parallel;
pub mod polyrec;
pub mod quadrature;
pub mod spectrum;
pub mod transform;

pub use error::{Error, Result};
pub use grid::Grid;
