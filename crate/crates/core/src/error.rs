use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}:{line}: {message}")]
    BadRow { path: PathBuf, line: u64, message: String },

    #[error("duplicate date {0}")]
    DuplicateDate(chrono::NaiveDate),

    #[error("non-positive close {close} on {date}")]
    NonPositiveClose { date: chrono::NaiveDate, close: f64 },

    #[error("invalid price bar on {date}: {message}")]
    InvalidBar { date: chrono::NaiveDate, message: String },

    #[error("dates must be strictly increasing")]
    UnorderedDates,

    #[error("series too short: need at least {needed} prices, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("fractions must sum to 1 (got {0})")]
    SplitFractions(f64),

    #[error("split fraction {0} outside (0, 1)")]
    SplitFractionRange(f64),

    #[error("{segment} segment has {got} prices, need at least {needed}")]
    SegmentTooShort {
        segment: &'static str,
        got: usize,
        needed: usize,
    },

    #[error("insufficient history: index {t} with window {window}")]
    InsufficientHistory { t: usize, window: usize },

    #[error("action {0} outside [-1, 1]")]
    ActionOutOfRange(f64),

    #[error("non-positive price {0}")]
    NonPositivePrice(f64),

    #[error("episode is terminal")]
    Terminal,

    #[error("empty cash curve")]
    EmptyCurve,

    #[error("non-positive cash {0}")]
    NonPositiveCash(f64),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty q-value vector")]
    EmptyQValues,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("zero standard deviation")]
    ZeroStd,

    #[error("zero variance of paired differences")]
    ZeroVariance,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("degrees of freedom must be >= 1 (got {0})")]
    InvalidDf(u64),

    #[error("non-positive initial cash {0}")]
    NonPositiveInitial(f64),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("no runs for strategy {0}")]
    MissingStrategy(String),

    #[error("seed lists of {x} and {y} do not line up")]
    MisalignedSeeds { x: String, y: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
