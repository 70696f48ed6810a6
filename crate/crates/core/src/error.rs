use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("potential must be finite and nonnegative (node {node}: {value})")]
    NegativePotential { node: usize, value: f64 },
    #[error("potential has zero total mass")]
    ZeroPotential,
    #[error("node {0} has zero weighted degree under the potential; floor mu first")]
    IsolatedNodeUnderMu(usize),
    #[error("explicit step dt={dt} is unstable (needs dt < {limit})")]
    UnstableStep { dt: f64, limit: f64 },
    #[error("operator is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("dense operation requested for n={n} > {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("iteration did not converge after {iterations} steps (last estimate {estimate})")]
    NotConverged { iterations: usize, estimate: f64 },
    #[error("signal is identically zero")]
    ZeroSignal,
    #[error("invalid size parameter: {0}")]
    BadSize(String),
    #[error("lambda_max must be positive, got {0}")]
    NonPositiveLambdaMax(f64),
    #[error("loss must be a 1x1 tensor, got {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },
    #[error("loss variable was not recorded on this tape")]
    DetachedLoss,
    #[error("mask selects no entries")]
    EmptyMask,
    #[error("graph still disconnected after {0} attempts")]
    DisconnectedAfterRetries(usize),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("dataset missing: {0}")]
    DatasetMissing(String),
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NaNLoss { epoch: usize, detail: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
