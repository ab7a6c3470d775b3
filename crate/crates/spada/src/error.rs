//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed raster header {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("unknown dtype {dtype:?} in {path}")]
    UnknownDtype { path: PathBuf, dtype: String },

    #[error("payload length mismatch in {path}: header implies {expected} bytes, found {actual}")]
    PayloadLength {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("unsupported raster layout in {path}: dtype {dtype}, {bands} band(s)")]
    UnsupportedLayout {
        path: PathBuf,
        dtype: String,
        bands: usize,
    },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("missing band {0:?}")]
    MissingBand(String),

    #[error("non-finite value at band {band}, pixel ({row}, {col})")]
    NonFinite { band: usize, row: usize, col: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("tile size must be positive and no larger than the raster (tile {tile}, raster {height}x{width})")]
    InvalidTileSize {
        tile: usize,
        height: usize,
        width: usize,
    },

    #[error("tile stride must be positive")]
    InvalidStride,

    #[error("unmapped source id {id} covering {pixels} pixel(s) ({other_ids} further unmapped id(s))")]
    UnmappedSourceId {
        id: u16,
        pixels: usize,
        other_ids: usize,
    },

    #[error("invalid class mapping: {0}")]
    InvalidMapping(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("point ({row}, {col}) outside raster extent {height}x{width}")]
    PointOutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("conflicting point annotations at ({row}, {col}): {first} vs {second}")]
    PointConflict {
        row: usize,
        col: usize,
        first: String,
        second: String,
    },

    #[error("malformed points file {path}: line {line}: {reason}")]
    MalformedPoints {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("non-finite {0}")]
    NonFiniteValue(String),

    #[error("stale forward cache: {0}")]
    StaleCache(String),

    #[error("malformed checkpoint {path}: {reason}")]
    MalformedCheckpoint { path: PathBuf, reason: String },

    #[error("empty confusion matrix")]
    EmptyConfusionMatrix,

    #[error("invalid prediction value {value} at ({row}, {col}); predictions must be dense trainable classes")]
    InvalidPrediction { value: u8, row: usize, col: usize },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("toml error in {path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("png encoding failed for {path}: {source}")]
    Png {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
