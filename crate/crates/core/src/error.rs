use alloc::string::String;

/// Errors raised by the model, inference, estimation and evaluation code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    /// A parameter or argument lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The model structure cannot support the request (e.g. K = 1).
    #[error("model structure error: {0}")]
    ModelStructure(String),
    #[error("invalid session: {0}")]
    InvalidSession(String),
    /// The prefix has zero probability under the model.
    #[error("impossible prefix: observed pages have zero probability under the model")]
    ImpossiblePrefix,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("configuration error: {0}")]
    Config(String),
    /// Every optimization run failed; carries the best objective reached.
    #[error("estimation failed: {message} (best objective {best_objective})")]
    EstimationFailed { message: String, best_objective: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
