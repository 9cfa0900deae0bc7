use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid sparse vector: {0}")]
    InvalidSparseVector(String),

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("quadrature grid too narrow: tail mass {tail_mass:e} outside [{lo}, {hi}]")]
    GridTooNarrow { lo: f64, hi: f64, tail_mass: f64 },

    #[error("dimension s = {s} outside [0, {p}]")]
    SizeOutOfRange { s: usize, p: usize },

    #[error("combinatorial budget exceeded: s = {s} > s_max = {s_max}")]
    BudgetExceeded { s: usize, s_max: usize },

    #[error("combinatorial budget exceeded: {count:e} supports > limit {limit:e}")]
    SubsetBudget { count: f64, limit: f64 },

    #[error("singular matrix for support {0:?}")]
    Singular(Vec<usize>),

    #[error("simulation truth required but missing")]
    MissingTruth,

    #[error("empty chain")]
    EmptyChain,

    #[error("non-finite log-likelihood at iteration {iter}: {dump}")]
    NonFinite { iter: usize, dump: String },

    #[error("cached log-likelihood drifted by {drift:e} at iteration {iter}")]
    LoglikDrift { iter: usize, drift: f64 },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
