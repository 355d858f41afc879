use thiserror::Error;

/// Errors raised by the library.
///
/// Report-style operations (model validation, martingale checks, decomposition
/// checks) return reports instead; these variants cover hard failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} count {count} exceeds cap {cap}")]
    CapExceeded { what: &'static str, count: u128, cap: u64 },

    #[error("degenerate pair at step {step}: both increments are zero")]
    DegeneratePair { step: usize },

    #[error("no feasible selection: {0}")]
    NoFeasibleSelection(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for budget and cap failures, which the CLI maps to exit code 2.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::CapExceeded { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
