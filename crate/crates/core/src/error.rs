use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("too many sources: {0} (at most {max} supported)", max = crate::regions::MAX_SOURCES)]
    TooManySources(usize),

    #[error("strong interference violated: g12^2 = {g12_sq}, g21^2 = {g21_sq} (both must be >= 1)")]
    WeakInterference { g12_sq: f64, g21_sq: f64 },

    #[error("value {value} outside quantizer domain [-{bound}, {bound}]")]
    OutOfDomain { value: f64, bound: f64 },

    #[error("not a probability distribution: {0}")]
    NotADistribution(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domination violated: {0}")]
    Domination(String),

    #[error("wringing did not terminate within {limit} steps")]
    StepLimit { limit: usize },

    #[error("power constraint violated: source {source_index}, message {message}: |x|^2 = {energy} > {limit}")]
    PowerViolation {
        source_index: usize,
        message: usize,
        energy: f64,
        limit: f64,
    },

    #[error("message tuple count {count} exceeds decoding cap {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("simulation budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("internal invariant failed: {0}")]
    Invariant(String),

    #[error("malformed codebook file: {0}")]
    Codebook(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
