use std::io;
use std::path::PathBuf;

use mrt_core::TemplateError;

use crate::gateway::GatewayError;
use crate::harness::HarnessError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("malformed CSV {}{}: {message}", path.display(), row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    MalformedCsv { path: PathBuf, row: Option<usize>, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    BadRecord { path: PathBuf, line: usize, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("the explainer produced no instructions")]
    EmptyPlan,
    #[error("unknown question id `{0}`")]
    UnknownQuestionId(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Error {
        let path = path.into();
        if source.kind() == io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Process exit code: 1 usage, 2 I/O, 3 gateway.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Usage(_) | Error::Config(_) | Error::UnknownQuestionId(_) => 1,
            Error::Gateway(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
