use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("Dalang's condition fails: {0}")]
    Dalang(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("quadrature did not converge: value {value:e}, error estimate {abs_err:e} after {intervals} intervals")]
    Quadrature {
        value: f64,
        abs_err: f64,
        intervals: usize,
    },
    #[error("budget insufficient: {0}")]
    Budget(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
