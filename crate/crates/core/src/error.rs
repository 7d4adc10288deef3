use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("subspace lattice of GF(2)^{k} exceeds the enumeration limit k_max = {k_max}")]
    LatticeTooLarge { k: usize, k_max: usize },

    #[error("{what}: estimated cost {estimated} exceeds the budget {budget}")]
    BudgetExceeded { what: String, estimated: u128, budget: u128 },

    #[error("cannot parse {input:?}: {reason}")]
    Parse { input: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(input: &str, reason: impl Into<String>) -> Self {
        Error::Parse { input: input.to_owned(), reason: reason.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
