use crate::profiles::ConfigId;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("trace set has no instances or no configurations")]
    EmptyTraceSet,

    #[error("objective trace for config {config} on instance `{instance}` increases at checkpoint {checkpoint}")]
    NonMonotoneTrace {
        config: ConfigId,
        instance: String,
        checkpoint: usize,
    },

    #[error("profile for config {config} is not monotone non-increasing at checkpoint {checkpoint}")]
    NonMonotoneProfile { config: ConfigId, checkpoint: usize },

    #[error("quality {value} for config {config} at checkpoint {checkpoint} is outside [0, 1]")]
    QualityOutOfRange {
        config: ConfigId,
        checkpoint: usize,
        value: f64,
    },

    #[error("unknown configuration id {0}")]
    UnknownConfig(ConfigId),

    #[error("duplicate configuration id {0}")]
    DuplicateConfig(ConfigId),

    #[error("checkpoint index {index} is out of range for a {count}-checkpoint schedule")]
    CheckpointOutOfRange { index: usize, count: usize },

    #[error("checkpoint {0} is the final checkpoint; violation is never tested there")]
    FinalCheckpointViolation(usize),

    #[error("partial profile has {defined} checkpoints; cannot test violation at checkpoint {index}")]
    PartialProfileTooShort { defined: usize, index: usize },

    #[error("invalid checkpoint schedule: {0}")]
    InvalidSchedule(String),

    #[error("profile for config {config} has {got} checkpoints, schedule has {want}")]
    ProfileLengthMismatch {
        config: ConfigId,
        got: usize,
        want: usize,
    },

    #[error("profile set is empty")]
    EmptyProfileSet,

    #[error("quality matrix has no configurations")]
    EmptyMatrix,

    #[error("fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),

    #[error("invalid margin policy: {0}")]
    InvalidMargin(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("schedule mismatch between {left} and {right}")]
    ScheduleMismatch { left: String, right: String },

    #[error("evaluator failed for config {config}: {message}")]
    Evaluator { config: ConfigId, message: String },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for I/O failures, false for validation-style errors. The CLI
    /// uses this split for its exit codes.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
