use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI exit codes: bad arguments
/// (2), capacity (3), budget/precision (4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: needs {needed} {unit}, budget is {budget}")]
    Capacity {
        needed: u64,
        budget: u64,
        unit: &'static str,
    },

    #[error("work budget exceeded: requires ~{required} operations, budget is {budget}")]
    Budget { required: u128, budget: u128 },

    #[error("requested tolerance {requested:e} not met: achieved error bound {achieved:e}")]
    Precision { requested: f64, achieved: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
