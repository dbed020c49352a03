use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum CircleError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("points live on circles of different circumference")]
    MismatchedCircumference,

    #[error("antipodal points: the shorter arc is ill-defined")]
    AntipodalAmbiguity,

    #[error("coincident points where distinct points are required")]
    CoincidentPoints,

    #[error("circumference must be rational for this operation")]
    IrrationalCircumference,

    #[error("unknown vertex id {0}")]
    UnknownVertex(usize),

    #[error("position already present in the vertex pool")]
    DuplicatePosition,

    #[error("budget exhausted after {tried} trials: {what}")]
    BudgetExhausted { what: String, tried: u64 },

    #[error("empty constraint intersection: {0} (signals an upstream bug)")]
    Inconsistency(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("pool too sparse: {0}")]
    InsufficientDensity(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CircleError {
    /// CLI exit code: 2 for budget exhaustion, 3 for invariant violations,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CircleError::BudgetExhausted { .. } => 2,
            CircleError::InvariantViolation(_) | CircleError::Inconsistency(_) => 3,
            _ => 1,
        }
    }
}
