use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("integers {0} and {1} are not co-prime")]
    NonCoprime(u64, u64),
    #[error("co-prime pattern needs m < n, got m = {m}, n = {n}")]
    BadOrder { m: u64, n: u64 },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("invalid scene: {0}")]
    BadScene(String),
    #[error("no samples supplied")]
    Empty,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e}, trace {trace:e})")]
    NotPsd { min_eig: f64, trace: f64 },
    #[error("closed-form rank needs 2d/lambda = N = {n}, got {ratio}")]
    UnsupportedSpacing { ratio: f64, n: u64 },
    #[error("half-bandwidth {0} outside (0, 0.5)")]
    BadBandwidth(f64),
    #[error("Gram matrix of the clutter basis is ill-conditioned (condition number {0:e})")]
    SingularGram(f64),
    #[error("core matrix of the inversion lemma is numerically singular")]
    SingularCore,
    #[error("covariance matrix is singular")]
    Singular,
    #[error("requested rank {requested} exceeds dimension {available}")]
    RankTooLarge { requested: usize, available: usize },
    #[error("malformed data file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
