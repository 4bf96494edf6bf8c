use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index {index} is out of range for length {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("pilot pattern is empty")]
    EmptyPattern,

    #[error("pilot index {0} appears more than once")]
    DuplicateIndex(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("least-squares system is rank deficient (condition estimate {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("support columns are linearly dependent; the bound is undefined")]
    Singular,

    #[error("invalid count: {0}")]
    InvalidCount(String),

    #[error("{n} subcarriers cannot be split into {n_p} equidistant pilots")]
    NotDivisible { n: usize, n_p: usize },

    #[error("no cyclic difference set is known for N={n}, N_p={n_p}")]
    NoDifferenceSet { n: usize, n_p: usize },

    #[error("two profile delays round to the same sample index {index}")]
    DelayCollision { index: usize },

    #[error("pilot symbol at position {position} is zero")]
    ZeroPilotSymbol { position: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    ConfigInvalid(Vec<String>),
}

impl Error {
    /// Domain infeasibility (the requested construction does not exist),
    /// as opposed to a malformed request or a numerical failure.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::NoDifferenceSet { .. } | Error::NotDivisible { .. })
    }
}
