use datashare_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}, column {column}: cannot parse '{cell}' as a number")]
    ParseError { line: usize, column: usize, cell: String },
    #[error("line {line} has {found} fields, expected {expected}")]
    RaggedRows { line: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: value '{cell}' is not a finite number")]
    NonNumericCell { line: usize, column: usize, cell: String },
    #[error("target column {0} is out of range")]
    TargetOutOfRange(usize),
    #[error("cannot open {path}: {message}")]
    Open { path: String, message: String },
    #[error("no data rows")]
    Empty,
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl From<CoreError> for CliError {
    fn from(source: CoreError) -> Self {
        CliError::Core { context: "error".into(), source }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Verification(_) => 3,
            _ => 2,
        }
    }
}

pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, CoreError> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { context: what(), source })
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
