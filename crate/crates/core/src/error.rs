use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or schemas that don't line up (feature counts, columns, masks).
    #[error("schema error: {0}")]
    Schema(String),

    /// A conditional metric was requested over an empty conditioning set.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// No feature can be moved at finite cost.
    #[error("infeasible manipulation: {0}")]
    InfeasibleManipulation(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("cost function is not outcome monotone: {0}")]
    MonotonicityViolation(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// No candidate satisfies the requested constraint.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
