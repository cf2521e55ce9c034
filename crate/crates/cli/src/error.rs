use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dirreg_core::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("no response columns: {0}")]
    NoResponseColumns(String),
    #[error("every row was dropped for missing values")]
    AllRowsDropped,
    #[error("missing artifact {0}")]
    MissingArtifacts(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    /// Stable machine-readable code, written to `fit.json` on failure.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Parse { .. } => "parse_error",
            CliError::NoResponseColumns(_) => "no_response_columns",
            CliError::AllRowsDropped => "all_rows_dropped",
            CliError::MissingArtifacts(_) => "missing_artifacts",
            CliError::Config(_) => "invalid_config",
            CliError::Io { .. } => "io_error",
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
