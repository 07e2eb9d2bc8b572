use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cone variant mismatch")]
    VariantMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("too few samples: {found} < {required}")]
    TooFewSamples { found: usize, required: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("rejection sampler exhausted after {attempts} draws (acceptance rate below {rate_bound:.3e})")]
    RejectionExhausted { attempts: usize, rate_bound: f64 },

    #[error("moments unavailable: {0}")]
    MomentsUnavailable(String),

    #[error("unbounded integrand: {0}")]
    Unbounded(String),

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("insufficient exceedances: {found} < {required}")]
    InsufficientExceedances { found: usize, required: usize },

    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
