use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("enumeration would produce {count} realizations, cap is {cap}")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("non-finite value {value} at realization {counts:?}")]
    NonFinite { value: f64, counts: Vec<u32> },

    #[error("solver did not converge: {0}")]
    Solver(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("complete-information solve failed at realization {counts:?}: {source}")]
    AtRealization {
        counts: Vec<u32>,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by bad input rather than by a solve.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Domain(_) | Error::Json(_) | Error::EnumerationCap { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
