use thiserror::Error;

/// Errors raised by fitting, imputation and estimation routines.
///
/// `Degenerate` is the recoverable class: the harness records it as a failed
/// replication instead of aborting the cell.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("singular design: columns [{}] are linearly dependent", .columns.join(", "))]
    Singular { columns: Vec<String> },

    #[error("logistic fit separated after {iterations} iterations")]
    Separation { iterations: usize },

    #[error("degenerate cell: {0}")]
    Degenerate(String),

    #[error("integrity violation: {0}")]
    Integrity(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures that should discard a replication rather than abort a run.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::Separation { .. } | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
