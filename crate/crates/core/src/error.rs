use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pixel ({u}, {v}) outside {height}x{width} raster")]
    OutOfBounds {
        u: i64,
        v: i64,
        height: usize,
        width: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("could not place block {block} without collision after {attempts} attempts")]
    Spawn { block: usize, attempts: usize },
    #[error("block multiset mismatch between world and goal")]
    BlockMismatch,
    #[error("world already matches the goal")]
    AlreadySolved,
    #[error("oracle has no legal move: {0}")]
    NoLegalMove(String),
    #[error("world contains no blocks")]
    NoBlocks,
    #[error("action-value map is identically zero, nothing to propose")]
    EmptyProposal,
    #[error("planning failed: {0}")]
    PlanningFailure(String),
    #[error("root node (depth 0) has no value")]
    RootNode,
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("png decode: {0}")]
    PngDecode(#[from] png::DecodingError),
    #[error("png encode: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error("malformed log: {0}")]
    Log(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
