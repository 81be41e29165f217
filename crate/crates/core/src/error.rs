use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A Cholesky pivot was not strictly positive.
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("value {0} is outside the function domain")]
    DomainError(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("lattice basis is singular (Gram-Schmidt norm {norm:e} at row {row})")]
    SingularBasis { row: usize, norm: f64 },

    #[error("equation coefficient vector is zero")]
    ZeroCoefficient,

    #[error("candidate set exceeds the cap of {cap} vectors")]
    BoundTooLarge { cap: u64 },

    #[error("only {found} linearly independent candidates, {wanted} requested")]
    InsufficientIndependentVectors { found: usize, wanted: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed channel file: {0}")]
    MalformedChannelFile(String),

    #[error("relay {relay}: {source}")]
    Relay {
        relay: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_relay(self, relay: usize) -> Error {
        Error::Relay {
            relay,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_trial(self, trial: u64) -> Error {
        Error::Trial {
            trial,
            source: Box::new(self),
        }
    }
}
