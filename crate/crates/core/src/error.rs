use thiserror::Error;

/// Errors raised while reading, validating or analysing models.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("syntax error: {0}")]
    Syntax(String),

    #[error("{location}: unknown state `{state}`")]
    UnknownState { location: String, state: String },

    #[error("{location}: unknown action `{action}`")]
    UnknownAction { location: String, action: String },

    #[error("{location}: probabilities sum to {sum}, expected 1")]
    BadSum { location: String, sum: String },

    #[error("{location}: {message}")]
    Invalid { location: String, message: String },

    #[error("duplicate {kind} `{id}`")]
    Duplicate { kind: &'static str, id: String },

    #[error("state `{0}` has no available action")]
    EmptyActions(String),

    #[error("initial state `{0}` is final; the reduction requires q0 not in F")]
    InitialFinal(String),

    #[error("alphabet has {0} letters; the reduction requires exactly 2")]
    AlphabetSize(usize),

    #[error("invalid strategy: {0}")]
    Strategy(String),

    #[error("invalid coupling: {0}")]
    Coupling(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("polynomial degree {0} exceeds 6")]
    DegreeOverflow(u32),

    #[error("invalid polynomial: {0}")]
    Polynomial(String),

    #[error("model has {states} states, above the cap of {cap}")]
    CapExceeded { states: usize, cap: usize },
}

impl Error {
    pub(crate) fn invalid(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for errors that stem from malformed input rather than analysis limits.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::CapExceeded { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
