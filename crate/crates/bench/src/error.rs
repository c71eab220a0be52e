use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    /// Bad flags or config values; the process exits with status 2.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Solver(#[from] gslap::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> BenchError {
    BenchError::Usage(msg.into())
}

pub type Result<T> = std::result::Result<T, BenchError>;
