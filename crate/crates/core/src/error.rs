use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Hurst coefficient must lie strictly inside (0, 1), got {0}")]
    InvalidHurst(f64),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid truncation interval ({lower}, {upper})")]
    InvalidInterval { lower: f64, upper: f64 },

    #[error("state violates the sampler constraint: {0}")]
    InfeasibleState(String),

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("chain of length {len} is too short for max lag {max_lag}")]
    ChainTooShort { len: usize, max_lag: usize },

    #[error("{block} update failed at iteration {iteration}: {source}")]
    Sampler {
        iteration: usize,
        block: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("generator is reducible")]
    ReducibleGenerator,

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("panel parse error at row {row}, column {col}: {msg}")]
    PanelEntry { row: usize, col: usize, msg: String },

    #[error("ragged panel: row {row} has {found} entries, expected {expected}")]
    RaggedPanel {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("empty panel file")]
    EmptyPanel,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(self, iteration: usize, block: &'static str) -> Error {
        Error::Sampler {
            iteration,
            block,
            source: Box::new(self),
        }
    }
}
