use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("malformed sequence: {0}")]
    MalformedSequence(String),

    #[error("state {state:?} lies outside the state domain")]
    StateOutsideDomain { state: Vec<f64> },

    #[error("state {state:?} matches regions {regions:?}")]
    AmbiguousRegion { state: Vec<f64>, regions: Vec<usize> },

    #[error("state {state:?} matches no region")]
    UnclassifiedState { state: Vec<f64> },

    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),

    #[error("invalid abstraction: {0}")]
    InvalidAbstraction(String),

    #[error("dimension {dim} exceeds the sign-pattern limit of {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("edge rejected: {0}")]
    RejectedEdge(String),

    #[error("more than {cap} walks (stopped after {reached})")]
    CapExceeded { cap: usize, reached: usize },

    #[error("subsystem {} has no admissible successor", .last + 1)]
    NoAdmissibleSuccessor { last: usize },

    #[error("initial state lies in region {found}, walk starts at region {expected}")]
    StartRegionMismatch { expected: usize, found: usize },

    #[error("control value {value} at t={t} lies outside the control set")]
    ControlOutOfBounds { t: usize, value: f64 },

    #[error("state at t={t} lies in region {found:?}, walk expects region {expected}")]
    RegionDeviation {
        t: usize,
        expected: usize,
        found: Option<usize>,
    },

    #[error("oracle budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("realized sequence failed verification: {0}")]
    VerificationFailed(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code used in structured diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSystem(_) => "INVALID_SYSTEM",
            Error::MalformedSequence(_) => "MALFORMED_SEQUENCE",
            Error::StateOutsideDomain { .. } => "STATE_OUTSIDE_DOMAIN",
            Error::AmbiguousRegion { .. } => "AMBIGUOUS_REGION",
            Error::UnclassifiedState { .. } => "UNCLASSIFIED_STATE",
            Error::UnsupportedStructure(_) => "UNSUPPORTED_STRUCTURE",
            Error::InvalidAbstraction(_) => "INVALID_ABSTRACTION",
            Error::DimensionTooLarge { .. } => "DIMENSION_TOO_LARGE",
            Error::RejectedEdge(_) => "REJECTED_EDGE",
            Error::CapExceeded { .. } => "CAP_EXCEEDED",
            Error::NoAdmissibleSuccessor { .. } => "NO_ADMISSIBLE_SUCCESSOR",
            Error::StartRegionMismatch { .. } => "START_REGION_MISMATCH",
            Error::ControlOutOfBounds { .. } => "CONTROL_OUT_OF_BOUNDS",
            Error::RegionDeviation { .. } => "REGION_DEVIATION",
            Error::BudgetExceeded(_) => "BUDGET_EXCEEDED",
            Error::VerificationFailed(_) => "VERIFICATION_FAILED",
            Error::Parse(_) => "PARSE_ERROR",
            Error::Schema { .. } => "SCHEMA_ERROR",
            Error::Io(_) => "IO_ERROR",
        }
    }
}
