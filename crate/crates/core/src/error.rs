use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum MediationError {
    #[error("graph contains a directed cycle")]
    CycleDetected,
    #[error("edge endpoint `{0}` is not a declared node")]
    UnknownEndpoint(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown level `{level}` for variable `{variable}`")]
    UnknownLevel { variable: String, level: String },
    #[error("query sets must be pairwise disjoint")]
    OverlappingSets,
    #[error("query sets must be non-empty")]
    EmptyQuerySet,
    #[error("conditioning event has zero probability")]
    ZeroProbabilityCondition,
    #[error("positivity violation: {0}")]
    PositivityViolation(String),
    #[error("treatment arm `{0}` has no observations")]
    EmptyTreatmentArm(String),
    #[error("treatment variable `{0}` is not binary")]
    NonBinaryTreatment(String),
    #[error("propensity score is degenerate (pr(x|v) hits 0 or 1 on a positive-mass stratum)")]
    DegeneratePropensity,
    #[error("stratum has zero support in arm x1: {0}")]
    ZeroSupportStratum(String),
    #[error("design matrix is singular or not positive definite")]
    SingularDesign,
    #[error("correlation matrix is not positive semidefinite")]
    NotPositiveSemidefinite,
    #[error("Markov boundary search capped at {max} variables, got {got}")]
    BoundarySearchTooLarge { max: usize, got: usize },
    #[error("need at least 2 replications to estimate a variance, got {0}")]
    InsufficientReplications(usize),
    #[error("invalid input{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MediationError {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        MediationError::Parse { line: Some(line), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, MediationError>;
