use thiserror::Error;

/// Errors raised by the discretized resolvent toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("field is not rotation invariant and cannot live on a radial grid")]
    NotRadial,
    #[error("p must be ≥ 1 (got {0})")]
    InvalidExponent(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty probe set")]
    EmptyProbeSet,
    #[error(
        "Birman-Schwinger operator is near-singular at lambda = {lambda}: \
         sigma_min = {sigma_min:.3e} below floor {floor:.3e} (possible embedded eigenvalue or resonance)"
    )]
    NearSingular { lambda: f64, sigma_min: f64, floor: f64 },
    #[error("zero-energy eigenvalue or resonance suspected (sigma_min = {sigma_min:.3e})")]
    ResonanceSuspected { sigma_min: f64 },
    #[error("Neumann series precondition failed: ||(V R0)^2|| = {norm:.4} is not below 1/2; use the direct inverse")]
    NeumannPrecondition { norm: f64 },
    #[error("Nyquist guard violated: panel {panel:.3e} * 2t * lambda_max = {product:.3} is not below pi/2")]
    Nyquist { panel: f64, product: f64 },
    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },
    #[error("composed operator norm overflowed at Born order {k}")]
    Overflow { k: usize },
    #[error("degenerate Monte Carlo sampler: potential vanishes identically")]
    DegenerateSampler,
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("non-positive value encountered: {0}")]
    NonPositive(String),
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error("table parse error at line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
