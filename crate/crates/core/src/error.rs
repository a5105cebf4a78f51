use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("subsystem index {index} out of range for a {len}-factor layout")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("partial trace needs a non-empty keep set")]
    EmptyKeepSet,

    #[error("layout has {0} factors; partial transpose needs exactly two")]
    NotBipartite(usize),

    #[error("matrix is not Hermitian (max |m - m^dagger| = {0:.3e})")]
    NotHermitian(f64),

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coupling is singular at t = {t} (sin(gamma) = 0)")]
    SingularCoupling { t: f64 },

    #[error("trace drifted by {drift:.3e} at t = {t}")]
    TraceDrift { t: f64, drift: f64 },

    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },

    #[error("minimum eigenvalue {value:.3e} below -1e-7 at t = {t}")]
    PositivityViolation { t: f64, value: f64 },

    #[error("renormalization triggered {0} times (limit 100)")]
    TooManyRenormalizations(usize),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
