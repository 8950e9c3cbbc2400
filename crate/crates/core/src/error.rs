use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the admissible domain (bounds, dimensionality, duplicates).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    /// Kernel matrix stayed indefinite even at the largest nugget.
    #[error("kriging fit failed: {0}")]
    FitFailure(String),

    #[error("degenerate plane fit: {0}")]
    DegenerateFit(String),

    #[error("confidence interval undefined: {0}")]
    CiUndefined(String),

    #[error("degenerate budget direction: {0}")]
    DegenerateDirection(String),

    #[error("grid does not cover {} requested cell(s): {cells:?}", cells.len())]
    Coverage { cells: Vec<(usize, usize)> },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// True for failures that stem from numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::FitFailure(_) | Error::DegenerateFit(_) | Error::DegenerateDirection(_) | Error::CiUndefined(_)
        )
    }
}
