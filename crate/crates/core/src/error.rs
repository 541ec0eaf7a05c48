use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing manifest in {0}")]
    MissingManifest(PathBuf),

    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },

    #[error("empty sequence")]
    EmptySequence,

    #[error("frame {index}: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    FrameDimensions {
        index: usize,
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("pgm decode: {0}")]
    Pgm(String),

    #[error("{what} dimensions mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        what: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("csv row {row}: {msg}")]
    Csv { row: usize, msg: String },

    #[error("unknown category code {0:?}")]
    UnknownCategory(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("model version mismatch: {0:?}")]
    ModelVersion(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("calibration needs more than 4 correspondences, got {0}")]
    TooFewPoints(usize),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("non-finite feature value in sample {0}")]
    NonFinite(usize),

    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    FeatureDimension { expected: usize, got: usize },

    #[error("solver did not converge within {0} iterations")]
    NotConverged(usize),

    #[error("frame index {got} does not follow {last}")]
    FrameOrder { last: u64, got: u64 },

    #[error("no track model for {0} direction")]
    MissingTrackModel(&'static str),

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("scene: {0}")]
    Scene(String),

    #[error("config key {key}: {msg}")]
    Config { key: String, msg: String },

    #[error("frame {index}: {source}")]
    AtFrame {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_frame(self, index: u64) -> Self {
        Error::AtFrame {
            index,
            source: Box::new(self),
        }
    }
}
