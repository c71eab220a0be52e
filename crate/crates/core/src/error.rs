use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Elimination hit a row that is not diagonally dominant or a zero pivot.
    #[error("numerical breakdown at row {row}: {reason}")]
    Breakdown { row: usize, reason: String },

    #[error("price S = {price} outside grid coverage [{lo}, {hi}]")]
    OutOfDomain { price: f64, lo: f64, hi: f64 },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("worker {worker}: {source}")]
    Worker {
        worker: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    pub(crate) fn on_worker(self, worker: usize) -> Self {
        Error::Worker {
            worker,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
