use alloc::string::String;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter or argument violates its documented precondition.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// Input data (paths, tables, files) failed validation.
    #[error("invalid data: {0}")]
    InvalidData(String),
    /// The requested quantity does not exist for these inputs.
    #[error("domain error: {0}")]
    Domain(String),
    /// Adaptive quadrature ran out of subdivisions.
    #[error("quadrature did not reach tolerance (estimate {estimate}, error {error_estimate})")]
    Quadrature { estimate: f64, error_estimate: f64 },
    /// A bracketing root finder was given an interval without a sign change.
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    /// A spline was evaluated outside of its knot range.
    #[error("t = {t} is outside the interpolation range [{lo}, {hi}]")]
    Extrapolation { t: f64, lo: f64, hi: f64 },
    /// A simulated birth-death path exceeded the population guard.
    #[error("population exceeded {limit} individuals at t = {time}")]
    PathExplosion { limit: u64, time: f64 },
    /// The objective was never finite on the search box.
    #[error("objective was not finite at any evaluated point")]
    NoFiniteObjective,
    /// A first-passage boundary was reached by too few paths.
    #[error("boundary rarely reached (captured mass {mass}); extend horizon")]
    BoundaryRarelyReached { mass: f64 },
    /// Grid refinement of an iterative solver did not settle.
    #[error("grid refinement did not converge (relative sup-norm change {change})")]
    NonConvergent { change: f64 },
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. } | Error::InvalidData(_) | Error::Domain(_) => {
                ErrorKind::Validation
            }
            _ => ErrorKind::Numerical,
        }
    }

    pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
