use thiserror::Error;

/// CLI failures. [`CliError::exit_code`] maps them onto the stable exit codes:
/// 1 for a failed computation, 2 for usage and configuration problems.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: cutproj_core::Error,
    },
    #[error("input `{path}` line {line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use cutproj_core::Error as E;
        match self {
            CliError::Config { .. } | CliError::Usage(_) | CliError::Format { .. } => 2,
            CliError::Io { .. } => 2,
            CliError::Core { source, .. } => match source {
                E::InvalidArgument(_)
                | E::DimensionMismatch { .. }
                | E::PlateauTooSmall
                | E::SingularBasis => 2,
                _ => 1,
            },
        }
    }
}

pub(crate) trait Context<T> {
    fn context(self, what: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for cutproj_core::Result<T> {
    fn context(self, what: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            context: what.to_string(),
            source,
        })
    }
}
