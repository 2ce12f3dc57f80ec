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

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("malformed record: {0}")]
    MalformedRecord(String),

    #[error("unsupported PGM maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),

    #[error("truncated PGM payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("margin {margin} too large for {width}x{height} image")]
    MarginTooLarge {
        margin: usize,
        width: usize,
        height: usize,
    },

    #[error("image too small: {0}")]
    ImageTooSmall(String),

    #[error("window size must be odd and >= 3, got {0}")]
    InvalidWindow(usize),

    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),

    #[error("shadow band out of range: {0}")]
    BandTooWide(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate histogram: all pixels share one intensity")]
    DegenerateHistogram,

    #[error("need at least {needed} distinct intensities, found {found}")]
    TooFewDistinctIntensities { needed: usize, found: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("class {0} has no samples")]
    EmptyClass(u8),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("unknown feature {0:?}")]
    UnknownFeature(String),

    #[error("training set contains a single class")]
    SingleClass,

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("feature width mismatch: model expects {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of an iterative solver rather than bad input data.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NonConvergence(_) => true,
            Error::Stage { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
