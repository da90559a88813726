//! Numerical laboratory for the fractional heat operator `(∂_t - Δ)^s`, its
//! infinity-Laplacian variants, their mean value formulas, and the random
//! walks and games behind them.

pub mod ctrw;
pub mod dpp;
pub mod error;
pub mod fields;
pub mod fracheat;
pub mod infinity;
pub mod kernel;
pub mod limits;
pub mod meanvalue;
pub mod quad;
pub mod selftest;

pub use error::{Error, Result};
pub use fields::{make_test_function, parse_field, ScalarField, SpaceTimePoint, TestFunctionId};
pub use kernel::{FracParams, SignMode};
