use crate::config::ParseError;
use spde_moments::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 ok, 2 config, 3 Dalang, 4 budget, 5 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Domain(_) | CoreError::Unsupported(_) => 2,
                CoreError::Dalang(_) => 3,
                CoreError::Budget(_) => 4,
                CoreError::Quadrature { .. } | CoreError::Internal(_) => 5,
            },
            CliError::Io(_) => 5,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
