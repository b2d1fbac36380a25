use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{what} line {line}: {reason}")]
    Parse { what: String, line: usize, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("external aligner: {0}")]
    External(String),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] subalign_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(what: impl Into<String>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse { what: what.into(), line, reason: reason.into() }
    }

    /// Process exit status: 2 for bad input or usage, 1 for failures while
    /// running the pipeline.
    pub fn exit_code(&self) -> u8 {
        use subalign_core::Error as C;
        match self {
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            Error::Parse { .. } | Error::Usage(_) | Error::Json(_) => 2,
            Error::Core(
                C::InvalidArgument(_)
                | C::InvalidSentence { .. }
                | C::EmptyCorpus
                | C::GoldOutOfRange { .. }
                | C::InvalidGold(_)
                | C::InvalidMergeTable(_),
            ) => 2,
            _ => 1,
        }
    }
}
