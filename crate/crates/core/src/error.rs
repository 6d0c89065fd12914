use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("duplicate run id {0}")]
    DuplicateRunId(String),

    #[error("store locked: {0}")]
    StoreLocked(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown measure `{name}`; valid names and categories: {catalog}")]
    UnknownMeasure { name: String, catalog: String },

    #[error("corrupt record at line {line}: {msg}")]
    Corrupt { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable tag used by the CLI's machine-parseable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NotConverged(_) => "not_converged",
            Error::Degenerate(_) => "degenerate",
            Error::DuplicateRunId(_) => "duplicate_run_id",
            Error::StoreLocked(_) => "store_locked",
            Error::Config(_) => "config",
            Error::UnknownMeasure { .. } => "unknown_measure",
            Error::Corrupt { .. } => "corrupt",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
