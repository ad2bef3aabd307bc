use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("gradient undefined: points {i} and {j} coincide")]
    GradientUndefined { i: usize, j: usize },

    #[error("kernel is not locally integrable: {0}")]
    Integrability(String),

    #[error("quantile solver did not converge in cell {cell}")]
    QuantileNonConvergence { cell: String },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("representative selection failed: {0}")]
    Selection(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuantileNonConvergence { .. }
                | Error::Integrability(_)
                | Error::Sampling(_)
                | Error::Selection(_)
                | Error::Optimization(_)
                | Error::GradientUndefined { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
