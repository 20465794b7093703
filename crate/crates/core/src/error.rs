use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates its documented range.
    InvalidParameter { name: &'static str, reason: String },
    /// A point was evaluated outside the surface chart.
    OutOfDomain { coordinate: usize, value: f64 },
    /// An operation that needs at least one sample received none.
    EmptySample,
    /// Fewer usable points than a fit requires.
    TooFewPoints { usable: usize, required: usize },
    /// The minimizer stopped before reaching its optimality tolerance.
    NotConverged { iterations: usize, residual: f64 },
    /// Adaptive quadrature hit its depth limit. `table` holds `(t, f(t))`.
    Quadrature { estimate: f64, table: alloc::vec::Vec<(f64, f64)> },
    /// The requested cell is not met by the surface.
    CellNotHit,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => write!(f, "invalid `{name}`: {reason}"),
            Error::OutOfDomain { coordinate, value } => {
                write!(f, "coordinate {coordinate} = {value} lies outside the surface chart")
            }
            Error::EmptySample => f.write_str("empty sample"),
            Error::TooFewPoints { usable, required } => {
                write!(f, "{usable} usable points, at least {required} required")
            }
            Error::NotConverged { iterations, residual } => {
                write!(f, "solver did not converge after {iterations} iterations (residual {residual:.3e})")
            }
            Error::Quadrature { estimate, table } => write!(
                f,
                "quadrature did not reach tolerance (estimate {estimate:.6e}, {} nodes)",
                table.len()
            ),
            Error::CellNotHit => f.write_str("cell is not met by the surface"),
        }
    }
}

impl core::error::Error for Error {}
