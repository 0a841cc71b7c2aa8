use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    /// A certificate rule was applied outside its hypotheses. The message names
    /// the violated inequality.
    #[error("rule inapplicable: {0}")]
    RuleInapplicable(String),

    #[error("bound vacuous: {0}")]
    BoundVacuous(String),

    /// The tangency method cannot run on this query (for example the span of
    /// the tangent spaces fills the ambient space).
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed record: {0}")]
    Json(#[from] serde_json::Error),
}
