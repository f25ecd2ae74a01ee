use crate::model::StateVector;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A function family was evaluated outside its admissible domain.
    #[error("{family} evaluated outside its domain: {detail}")]
    Domain { family: &'static str, detail: String },

    /// A model parameter violates its declared bounds.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: &'static str,
    },

    /// Unknown parameter name passed to a sweep.
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    /// The solved point has a non-positive quantity or a negative declaration.
    #[error("infeasible equilibrium: {0}")]
    InfeasibleEquilibrium(String),

    /// Newton iteration failed to reach the residual tolerance.
    #[error("equilibrium solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: StateVector,
    },

    /// Roots may exist to the right of the search rectangle.
    #[error("search rectangle too small: {count} root(s) right of re = {re_max}; retry with re_max >= {suggested_re_max}")]
    RectangleTooSmall {
        re_max: f64,
        count: i64,
        suggested_re_max: f64,
    },

    /// Invalid search rectangle bounds.
    #[error("invalid rectangle: {0}")]
    InvalidRectangle(String),

    /// Argument-principle count could not be settled on an integer.
    #[error("winding number did not settle near an integer (estimate {estimate})")]
    WindingUnresolved { estimate: f64 },

    /// Located roots do not account for the argument-principle count.
    #[error("spectrum incomplete: found {found} root(s) but the winding count is {expected}")]
    IncompleteSpectrum { found: usize, expected: i64 },

    /// Integrator configuration is inconsistent.
    #[error("integrator configuration: {0}")]
    Configuration(String),

    /// A documented precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Bisection failed inside the bracket.
    #[error("bisection aborted with bracket [{lo}, {hi}]: {reason}")]
    BisectionAborted { lo: f64, hi: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
