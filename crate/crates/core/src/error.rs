use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singular matrix: eigenvalue {eigenvalue:e} is below the floor {floor:e}")]
    Singular { eigenvalue: f64, floor: f64 },

    #[error("step too large: I + L has eigenvalue {eigenvalue:e}; shrink the step")]
    StepTooLarge { eigenvalue: f64 },

    #[error("sampler exhausted after {drawn} draws ({needed} needed)")]
    SamplerExhausted { drawn: usize, needed: usize },

    #[error("group of order {order} exceeds the enumeration limit {limit}; use alignment instead")]
    EnumerationTooLarge { order: u128, limit: u128 },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
