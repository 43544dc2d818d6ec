use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("dimension mismatch: {0}")]
    DimensionError(String),

    #[error(
        "derivative leaves the support of the state (component {row},{col}, |X| = {magnitude:e})"
    )]
    SingularSupport {
        row: usize,
        col: usize,
        magnitude: f64,
    },

    #[error("capacity exceeded: {0}")]
    CapacityError(String),

    #[error("partition does not cover outcome `{0}`")]
    PartitionError(String),

    #[error("outcome `{label}` has probability {probability:e} but derivative {derivative:e}; Fisher information diverges")]
    SupportBoundary {
        label: String,
        probability: f64,
        derivative: f64,
    },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("no data")]
    NoData,

    #[error("likelihood is -inf on the whole parameter domain")]
    InfeasibleLikelihood,

    #[error("likelihood is flat on the parameter domain; data carry no information")]
    FlatLikelihood,

    #[error("inconsistent experimental design: {0}")]
    DesignError(String),

    #[error("two-stage estimation needs n >= 4, got {0}")]
    TooFewSamples(usize),

    #[error("{failures} of {trials} trials failed (limit 1%)")]
    TooManyFailures { failures: usize, trials: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("parameter outside the domain: {0}")]
    OutOfDomain(String),

    #[error("invalid weight matrix: {0}")]
    InvalidWeight(String),

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("missing estimate for outcome `{0}`")]
    MissingEstimate(String),

    #[error("io error: {0}")]
    IoError(String),
}

impl Error {
    /// Stable name of the error class, used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidOperator(_) => "InvalidOperator",
            Error::DimensionError(_) => "DimensionError",
            Error::SingularSupport { .. } => "SingularSupport",
            Error::CapacityError(_) => "CapacityError",
            Error::PartitionError(_) => "PartitionError",
            Error::SupportBoundary { .. } => "SupportBoundary",
            Error::DegenerateModel(_) => "DegenerateModel",
            Error::NoData => "NoData",
            Error::InfeasibleLikelihood => "InfeasibleLikelihood",
            Error::FlatLikelihood => "FlatLikelihood",
            Error::DesignError(_) => "DesignError",
            Error::TooFewSamples(_) => "TooFewSamples",
            Error::TooManyFailures { .. } => "TooManyFailures",
            Error::InvalidState(_) => "InvalidState",
            Error::InvalidPovm(_) => "InvalidPovm",
            Error::InvalidModel(_) => "InvalidModel",
            Error::OutOfDomain(_) => "OutOfDomain",
            Error::InvalidWeight(_) => "InvalidWeight",
            Error::InvalidOptions(_) => "InvalidOptions",
            Error::MissingEstimate(_) => "MissingEstimate",
            Error::IoError(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::IoError(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
