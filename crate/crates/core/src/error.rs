use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("truncated frame: {len} bytes is not a multiple of {frame} (2 bytes x {channels} channels)")]
    TruncatedFrame {
        len: u64,
        frame: u64,
        channels: usize,
    },

    #[error("channel count mismatch: expected {expected}, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("malformed geometry at line {line}: {msg}")]
    MalformedGeometry { line: usize, msg: String },

    #[error("duplicate channel {0}")]
    DuplicateChannel(usize),

    #[error("channel ids must be dense 0..{count}; missing {missing}")]
    SparseChannelIds { count: usize, missing: usize },

    #[error("channels {a} and {b} share the same position")]
    DuplicatePosition { a: usize, b: usize },

    #[error("unknown channel {0}")]
    UnknownChannel(usize),

    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("degenerate template (zero norm)")]
    DegenerateTemplate,

    #[error("infeasible placement: could not place {requested} neurons with {min_sep_um} um separation")]
    InfeasiblePlacement { requested: usize, min_sep_um: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed results: {0}")]
    MalformedResults(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
