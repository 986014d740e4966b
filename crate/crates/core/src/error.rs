use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter for {family}: {reason}")]
    InvalidParameter { family: &'static str, reason: String },

    #[error("value {value} outside the support of {family}")]
    Support { family: &'static str, value: f64 },

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid formula: {0}")]
    Formula(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("column `{column}` is not numeric: {reason}")]
    NonNumericColumn { column: String, reason: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("unknown network `{0}`")]
    UnknownNetwork(String),

    #[error("invalid model spec: {0}")]
    Spec(String),

    #[error("invalid training config: {0}")]
    Config(String),

    #[error("stale cache: {0}")]
    StaleCache(String),

    #[error("non-finite objective at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("non-finite objective: {0}")]
    NonFiniteObjective(String),

    #[error("degenerate observation {row}: every component has zero likelihood")]
    DegenerateRow { row: usize },

    #[error("mixture needs at least one component")]
    EmptyMixture,

    #[error("duplicate inflation value {0}")]
    DuplicateInflation(f64),

    #[error("validation split leaves no training rows")]
    EmptyTraining,
}
