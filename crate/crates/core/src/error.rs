use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced while loading activations or scanning them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("bad magic bytes {found:02x?}, expected \"ACTS\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported ACTS version {found}, expected {expected}")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("truncated header: got {actual} of 16 bytes")]
    TruncatedHeader { actual: usize },

    #[error("truncated payload: header declares {expected} floats, found {actual}")]
    TruncatedPayload { expected: u64, actual: u64 },

    #[error("trailing bytes after {expected} floats")]
    TrailingBytes { expected: u64 },

    #[error("non-finite activation at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("CSV line {line}: {message}")]
    CsvValue { line: usize, message: String },

    #[error("duplicate layer name {0:?}")]
    DuplicateLayer(String),

    #[error("layer {name:?} has nonpositive size {size}")]
    NonPositiveLayerSize { name: String, size: i64 },

    #[error("layout has no layers")]
    EmptyLayout,

    #[error("unknown layer {0:?}")]
    UnknownLayer(String),

    #[error("{what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("background column is empty")]
    EmptyBackground,

    #[error("invalid counts: n_beat {n_beat} + n_tie {n_tie} exceeds {n_background} backgrounds")]
    InvalidCounts {
        n_beat: usize,
        n_tie: usize,
        n_background: usize,
    },

    #[error("invalid p-value range ({p_min}, {p_max})")]
    InvalidRange { p_min: f64, p_max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid scan configuration: {0}")]
    InvalidConfig(String),

    #[error("no eligible nodes to scan")]
    NoEligibleNodes,

    #[error("exhaustive scan refuses {n} nodes (cap is {cap})")]
    OracleTooLarge { n: usize, cap: usize },

    #[error("empty {0} group")]
    EmptyGroup(&'static str),

    #[error("subset is empty")]
    EmptySubset,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by inconsistent shapes between inputs.
    pub fn is_dimension_mismatch(&self) -> bool {
        matches!(self, Error::DimensionMismatch { .. })
    }
}
