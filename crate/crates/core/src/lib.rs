//! Forward solvers and an inverse-source toolkit for time-fractional
//! evolution equations with constant or piecewise-constant order.

pub mod error;
pub mod forward;
pub mod fractional;
pub mod grid;
pub mod hypotheses;
pub mod inverse;
pub mod linalg;
pub mod operators;
pub mod quadrature;
pub mod scenario;
pub mod special;
pub mod suites;

pub use error::{FracError, Result};
