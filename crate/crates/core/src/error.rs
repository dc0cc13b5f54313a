use std::path::PathBuf;

/// Errors produced by the autodip library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("declared bit depth {declared} conflicts with file header ({found})")]
    BitDepthMismatch { declared: String, found: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("image too small: {0}")]
    TooSmall(String),

    #[error("pixel (y={y}, x={x}) is not covered by any patch")]
    Uncovered { y: usize, x: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("optimization diverged at iteration {iteration} (loss {loss})")]
    Diverged { iteration: usize, loss: f64 },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unsupported store format_version {found} (this build reads version {expected})")]
    StoreVersion { found: u64, expected: u32 },

    #[error("store schema violation at `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("no calibration entries for scope {scope}; available groups: {available}")]
    EmptyPool { scope: String, available: String },

    #[error("no embedding model has been fitted for this store")]
    NoEmbedding,

    #[error("perceptual backend: {0}")]
    Backend(String),

    #[error("group members have non-identical grids: {0}")]
    GridMismatch(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
