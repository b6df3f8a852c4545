use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config line {line}, key `{key}`: {msg}")]
    ConfigParse { line: usize, key: String, msg: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The outdated effective channel cannot support the requested number of streams.
    #[error("rank-deficient channel: fewer than {streams} nonzero singular values")]
    RankDeficient { streams: usize },

    #[error("singular covariance (condition estimate {condition:.3e})")]
    SingularCovariance { condition: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("inverse Wishart mean needs dof > dimension (dof = {dof}, dimension = {dim})")]
    DegreesOfFreedom { dof: usize, dim: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("fitness evaluation failed for particle {particle}: {source}")]
    Fitness {
        particle: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sample bank format: {0}")]
    BankFormat(String),

    #[error("experiment: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
