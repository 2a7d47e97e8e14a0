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

    #[error("{path}: {message} at byte offset {offset}")]
    BinaryFormat {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{path}: {message} at line {line}")]
    TextFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid dataset: {}", .0.join("; "))]
    InvalidDataset(Vec<String>),

    #[error("exact Shapley enumeration refused for n = {n} (limit {limit})")]
    TooManyPlayers { n: usize, limit: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
}
