use thiserror::Error;

/// Errors produced by the estimation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Schema(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("unknown node id `{0}`")]
    UnknownNode(String),
    #[error("missing slack node")]
    MissingSlack,
    #[error("multiple slack nodes")]
    MultipleSlack,
    #[error("slack node `{0}` is flagged zero-injection")]
    SlackZeroInjection(String),
    #[error("network is not connected: {islands} islands")]
    Disconnected { islands: usize },
    #[error("branch {0} has zero series admittance")]
    ZeroSeriesAdmittance(usize),
    #[error("invalid measurement location: {0}")]
    InvalidLocation(String),
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("invalid constraint set: {0}")]
    InvalidConstraint(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unobservable or dependent constraints: zero pivot at elimination step {pivot}")]
    Singular { pivot: usize },
    #[error("undefined performance index: {0}")]
    UndefinedIndex(String),
    #[error("power flow did not converge after {iterations} iterations")]
    PowerFlowDiverged { iterations: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
