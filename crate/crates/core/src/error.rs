use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition on a state was violated (e.g. unnormalized input).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The requested measurement outcome has (numerically) zero probability.
    #[error(
        "conditioning error: outcome n_m = {n_m} has probability {probability:e} below the floor"
    )]
    Conditioning { n_m: u64, probability: f64 },

    /// The squeezing parameter is undefined because the mean spin vanishes.
    #[error("singular state: mean spin length {0:e} is zero, squeezing parameter undefined")]
    Singular(f64),

    /// A truncated representation lost more probability than allowed.
    #[error("truncation error: {what} = {value:e} exceeds {bound:e}")]
    Truncation {
        what: &'static str,
        value: f64,
        bound: f64,
    },

    /// A distribution does not have the shape an analysis routine requires.
    #[error("shape error: {0}")]
    Shape(String),

    /// A cat arm carries no population, so its coherence is undefined.
    #[error("degenerate arm: population at M = {m_arm} is {population:e}")]
    DegenerateArm { m_arm: f64, population: f64 },

    /// Bracketing root search found no sign change.
    #[error("bracket error: {0}")]
    Bracket(String),

    /// Two independent routes to the same quantity disagree.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    /// A configuration document is malformed or names an invalid value.
    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
