use thiserror::Error;

/// Errors raised by the inference, privacy and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("incompatible observations: {0}")]
    IncompatibleObservations(String),

    #[error("datasets have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("negative input {0} where a nonnegative value is required")]
    NegativeInput(f64),

    #[error("invalid family parameter: {0}")]
    InvalidParameter(String),

    #[error("parameter outside the family's parameter space: {0}")]
    ParameterOutOfSpace(String),

    #[error("posterior has empty support: every likelihood is zero on the data")]
    EmptySupport,

    #[error("posterior kinds do not match: {0} vs {1}")]
    MismatchedPosteriors(&'static str, &'static str),

    #[error("reference distribution does not dominate: {0}")]
    NotDominated(String),

    #[error("metric {metric} is not supported for family {family}")]
    UnsupportedMetric { metric: String, family: String },

    #[error("partition of size {m} exceeds the admissible size {max} for this confidence level")]
    PartitionTooLarge { m: usize, max: usize },

    #[error("sample {0} falls outside every partition cell")]
    SampleOutsidePartition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
