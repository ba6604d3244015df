use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ionspin::Error),

    #[error("{0}")]
    Validation(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} of {total} verification checks failed")]
    VerifyFailed { failed: usize, total: usize },

    #[error("{0}")]
    Refused(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn parse(origin: &str, e: &serde_json::Error) -> Self {
        CliError::Validation(format!("{origin}: {e}"))
    }

    /// Deserialization error with the offending field path.
    pub fn parse_at(origin: &str, path: &str, e: &serde_json::Error) -> Self {
        if path.is_empty() || path == "." {
            CliError::parse(origin, e)
        } else {
            CliError::Validation(format!("{origin}: {path}: {e}"))
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 0 success, 1 validation, 2 numerical failure, 3 infeasible request.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => e.exit_code(),
            CliError::Validation(_) | CliError::Io { .. } => 1,
            CliError::VerifyFailed { .. } => 2,
            CliError::Refused(_) => 3,
        }
    }
}
