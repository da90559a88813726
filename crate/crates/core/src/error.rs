//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown test function tag `{0}`")]
    UnknownField(String),

    #[error("point lies outside the smooth region of field `{0}`")]
    OutsideSmoothRegion(String),

    #[error("quadrature did not converge: value {value:e}, estimated error {error:e}")]
    QuadratureFailure { value: f64, error: f64 },

    #[error("derivative `{0}` is not available for this field")]
    MissingDerivative(&'static str),

    #[error("gradient vanishes at the evaluation point (|grad| = {0:e})")]
    VanishingGradient(f64),

    #[error("acceptance rate {rate:e} fell below the floor {floor:e}")]
    AcceptanceStall { rate: f64, floor: f64 },

    #[error("touching condition violated: {0}")]
    TouchingViolated(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("degenerate ratio: operator value {0:e} is too close to zero")]
    DegenerateRatio(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_order(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("order s = {s} must lie in (0, 1)")))
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be positive and finite")))
    }
}
