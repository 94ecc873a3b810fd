use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: {len} samples cannot hold {needed}")]
    SeriesTooShort { len: usize, needed: usize },

    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },

    #[error("degenerate series: {0}")]
    SeriesDegenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input")]
    EmptyInput,

    #[error("zero total rule activation at inputs ({in1}, {in2})")]
    ZeroActivation { in1: f64, in2: f64 },

    #[error("invalid fuzzy system: {0}")]
    InvalidFuzzySystem(String),

    #[error("not enough states: need {needed}, have {available}")]
    NotEnoughStates { needed: usize, available: usize },

    #[error("index {index} out of range (valid {min}..{max})")]
    IndexOutOfRange { index: usize, min: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("fusion needs at least 2 trajectories, got {0}")]
    TooFewTrajectories(usize),

    #[error("too few states: need {needed}, have {available}")]
    TooFewStates { needed: usize, available: usize },

    #[error("non-finite fused state at step {step}")]
    NonFiniteState { step: usize },

    #[error("missing lead {0}")]
    MissingLead(String),

    #[error("lead order mismatch: expected {expected:?}, found {found:?}")]
    LeadOrderMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("unacceptable record: constant leads {0:?}")]
    UnacceptableRecord(Vec<String>),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("integration unstable: {reason}; try a sample rate of at least {suggested_sample_rate_hz} Hz")]
    IntegrationUnstable {
        reason: String,
        suggested_sample_rate_hz: f64,
    },

    #[error("noise power is zero")]
    ZeroNoisePower,

    #[error("signal power is zero")]
    ZeroSignalPower,

    #[error("noise segment too short: need {needed} samples from offset {offset}, source has {available}")]
    SegmentTooShort {
        needed: usize,
        offset: usize,
        available: usize,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: line {line}: expected {expected} columns, found {found}")]
    RaggedRows {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{0}: missing `# fs=<hz> leads=<names>` header")]
    MissingHeader(PathBuf),

    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("cannot write an empty trajectory")]
    EmptyTrajectory,

    #[error("window of {window} samples exceeds record length {len}")]
    WindowLargerThanRecord { window: usize, len: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
