use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UrnError {
    #[error("SyntaxError at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("DomainError at k={k}: {msg}")]
    Domain { k: f64, msg: String },
    #[error("OverflowError: feedback value exceeds float range at k={k}")]
    Overflow { k: f64 },
    #[error("ToleranceUnreachable: {0}")]
    ToleranceUnreachable(String),
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("UnknownExperiment: {0}")]
    UnknownExperiment(String),
    #[error("AssumptionViolated: {0}")]
    AssumptionViolated(String),
    #[error("OutOfRange: {0}")]
    OutOfRange(String),
    #[error("RadiusExceeded: |lambda|={lambda} >= radius {radius}")]
    RadiusExceeded { lambda: f64, radius: f64 },
    #[error("NotExplosive: agent {agent} does not satisfy the summability condition")]
    NotExplosive { agent: usize },
    #[error("LimitUndefined: {0}")]
    LimitUndefined(String),
    #[error("StepFailure: {0}")]
    StepFailure(String),
    #[error("InsufficientSamples: {got} < {need}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("Format: {0}")]
    Format(String),
    #[error("Io: {0}")]
    Io(String),
}

impl From<std::io::Error> for UrnError {
    fn from(e: std::io::Error) -> Self {
        UrnError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, UrnError>;
