use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid agent index {agent} (game has agents 0..={max})")]
    InvalidAgent { agent: usize, max: usize },

    #[error("{what} is not a probability vector (sum {sum})")]
    Unnormalized { what: &'static str, sum: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("payoff {value} lies outside the declared bounds [{lo}, {hi}]")]
    PayoffOutOfBounds { value: f64, lo: f64, hi: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("slack eps[{index}] = {value} is negative")]
    NegativeSlack { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{size} joint profiles exceed the dense cap of {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simplex exceeded {0} pivots")]
    PivotLimit(usize),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("regret probe for agent {agent} diverged at step {step}: {detail}")]
    ProbeDiverged {
        agent: usize,
        step: usize,
        detail: String,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
