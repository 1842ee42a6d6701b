use thiserror::Error;

/// Errors produced by the estimators, tests and I/O layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("subject in column {0} has no observed cell")]
    EmptySubject(usize),

    #[error("observed cell (row {row}, column {col}) holds a non-finite value")]
    NonFiniteObservedValue { row: usize, col: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("component {0} has no observations")]
    ComponentWithNoData(usize),

    #[error(
        "effect for component {component} is not estimable: group {group} has no observations"
    )]
    InestimableComponent { component: usize, group: usize },

    #[error("restriction to {method} leaves component {component} without data in group {group}")]
    EverythingFiltered {
        method: String,
        component: usize,
        group: usize,
    },

    #[error("no covariance part has at least two contributing subjects")]
    NoEstimablePart,

    #[error("pattern mismatch: {0}")]
    PatternMismatch(String),

    #[error("covariance estimate is zero while the effect deviates from one half")]
    ZeroCovariance,

    #[error("covariance estimate has zero trace while the effect deviates from one half")]
    ZeroTrace,

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid scenario: {key}: {reason}")]
    InvalidScenario { key: String, reason: String },

    #[error("parse error at line {line}, column {column}: {reason}")]
    ParseError {
        line: usize,
        column: usize,
        reason: String,
    },

    #[error("inconsistent row width at line {line}: expected {expected} fields, found {found}")]
    InconsistentWidth {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag, used in JSON error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::EmptySubject(_) => "empty_subject",
            Error::NonFiniteObservedValue { .. } => "non_finite_observed_value",
            Error::EmptyInput => "empty_input",
            Error::ComponentWithNoData(_) => "component_with_no_data",
            Error::InestimableComponent { .. } => "inestimable_component",
            Error::EverythingFiltered { .. } => "everything_filtered",
            Error::NoEstimablePart => "no_estimable_part",
            Error::PatternMismatch(_) => "pattern_mismatch",
            Error::ZeroCovariance => "zero_covariance",
            Error::ZeroTrace => "zero_trace",
            Error::DomainError(_) => "domain_error",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::InvalidScenario { .. } => "invalid_scenario",
            Error::ParseError { .. } => "parse_error",
            Error::InconsistentWidth { .. } => "inconsistent_width",
            Error::Io(_) => "io_error",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
