use thiserror::Error;

/// Everything that can go wrong across the calibration, evaluation and
/// scheduling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("timestamps must be strictly increasing with a uniform stride (violation at row {0})")]
    NonMonotoneTime(usize),
    #[error("feature vectors have inconsistent dimension (row {row}: expected {expected}, got {got})")]
    RaggedFeatures { row: usize, expected: usize, got: usize },
    #[error("non-finite value at row {0}")]
    NonFinite(usize),
    #[error("series too short: need {needed} steps, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("least-squares system is singular; set a positive ridge penalty")]
    SingularFit,
    #[error("shape mismatch: expected length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("need at least {k} windows to form {k} clusters, got {m}")]
    TooFewWindows { m: usize, k: usize },
    #[error("silhouette needs at least two non-empty clusters")]
    SingleCluster,
    #[error("soft-DTW input sequence is empty")]
    EmptySequence,
    #[error("horizon mismatch: store has b = {expected}, window has b = {got}")]
    HorizonMismatch { expected: usize, got: usize },
    #[error("two-sample test needs non-empty samples")]
    EmptySample,
    #[error("cluster {0} holds no error records")]
    EmptyCluster(usize),
    #[error("error set is empty")]
    EmptySet,
    #[error("interval and truth sequences are misaligned")]
    Misaligned,
    #[error("nothing to evaluate")]
    Empty,
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("plan violates load balance by {0}")]
    InfeasiblePlan(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {message}")]
    Ingest { line: usize, message: String },
    #[error("unsupported calibration store schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
