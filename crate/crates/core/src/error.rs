use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape error at {node}: {detail}")]
    Shape { node: String, detail: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("metadata error: {0}")]
    Metadata(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("line {line}: {detail}")]
    Manifest { line: usize, detail: String },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("image error: {0}")]
    Image(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn shape(node: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape {
            node: node.into(),
            detail: detail.into(),
        }
    }
}
