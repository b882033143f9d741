use thiserror::Error;

/// Errors produced by the sampling, fitting and experiment code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("design must contain at least one point")]
    EmptyDesign,

    #[error("quadrature order {order} exceeds the configured maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("function is not a probability density: mass {mass} deviates from 1 by more than {tol}")]
    NotADensity { mass: f64, tol: f64 },

    #[error("density is negative ({value}) at x = {x}")]
    NegativeDensity { x: f64, value: f64 },

    #[error("point x = {x} is degenerate: residual feature norm² {residual} below threshold")]
    DegeneratePoint { x: f64, residual: f64 },

    #[error("sampler failed after {attempts} consecutive degenerate draws")]
    SamplerFailure { attempts: usize },

    #[error("underdetermined design: n = {n} points for dimension m = {m}")]
    Underdetermined { n: usize, m: usize },

    #[error("stability conditioning failed after {attempts} attempts (best λ_min = {best_lambda_min})")]
    ConditioningFailure { attempts: usize, best_lambda_min: f64 },

    #[error("singular design: λ_min = {lambda_min}")]
    SingularDesign { lambda_min: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("quadrature did not converge up to order {order} (last change {change:e})")]
    Accuracy { order: usize, change: f64 },

    #[error("cannot aggregate an empty list of fits")]
    EmptyAggregate,

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::EmptyDesign
                | Error::UnsupportedOrder { .. }
                | Error::Underdetermined { .. }
                | Error::Domain(_)
                | Error::InvalidConfig(_)
                | Error::LengthMismatch { .. }
                | Error::EmptyAggregate
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
