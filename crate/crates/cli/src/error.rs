use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    /// The command ran but its checks did not pass.
    #[error("{0}")]
    Failed(String),

    #[error(transparent)]
    Core(#[from] riesz_core::Error),
}

impl CliError {
    /// 1 usage or parse error, 2 domain or validation failure, 3 numerical
    /// failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Failed(_) => 2,
            CliError::Core(e) => match e {
                riesz_core::Error::Parse { .. } | riesz_core::Error::Io(_) => 1,
                e if e.is_numerical() => 3,
                _ => 2,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
