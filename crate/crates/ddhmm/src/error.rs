use std::path::PathBuf;

/// Errors raised while reading or writing session, parameter and report files.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A row that cannot be parsed; `line` is 1-based and counts the header.
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: unknown page symbol `{symbol}`")]
    UnknownPage { line: u64, symbol: String },
    #[error("line {line}: duplicate step {step} in session `{session}`")]
    DuplicateStep { line: u64, session: String, step: u32 },
    /// Steps must run 1, 2, 3, ... with non-decreasing timestamps.
    #[error("line {line}: non-monotone steps in session `{session}`: {message}")]
    NonMonotoneStep { line: u64, session: String, message: String },
    #[error("parameter file: {0}")]
    Params(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ddhmm_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
