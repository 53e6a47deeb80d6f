use thiserror::Error;

/// Errors raised by the toolkit. Infinite divergences are values, not errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid feature set: {0}")]
    InvalidFeatures(String),

    #[error("invalid constraint set: {0}")]
    InvalidConstraints(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("models belong to different exponential families")]
    FamilyMismatch,

    #[error("feature index {index} out of range for {len} features")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("distribution is not in the constraint set: {0}")]
    NotInConstraintSet(String),

    #[error("moment mismatch: {0}")]
    MomentMismatch(String),

    #[error("enumeration cap exceeded: {count} histograms > cap {cap}")]
    EnumerationCap { count: u128, cap: u64 },

    #[error("event has probability zero")]
    EmptyEvent,

    #[error("event B is not a subset of A: {0}")]
    NotSubset(String),

    #[error("energy matching unattainable: {0}")]
    EnergyMatching(String),

    #[error("prior is not uniform")]
    PriorNotUniform,

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("inconsistent instance: {0}")]
    Inconsistent(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
