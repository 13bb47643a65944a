use datashare_linalg::LinalgError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("need n >= b >= 2 (n = {n}, b = {b})")]
    TooFewRows { n: usize, b: usize },
    #[error("center {center} has a singular Gram (lambda_min = {lambda_min:e})")]
    SingularBlock { center: usize, lambda_min: f64 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("baseline loss is zero")]
    ZeroBaseline,
    #[error("infeasible target spectrum: {0}")]
    InfeasibleSpectrum(String),
    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),
    #[error("epsilon must lie in (0, 1], got {0}")]
    BadEpsilon(f64),
    #[error("shared pool has {m} rows but {b} centers")]
    PoolTooSmall { m: usize, b: usize },
    #[error("center {0} would be left without rows")]
    EmptyResidualBlock(usize),
    #[error("center {0} contributes no pooled rows")]
    EmptyContribution(usize),
    #[error("PCG stagnated at iteration {iteration} (best residual {best:e})")]
    Stagnation { iteration: usize, best: f64 },
    #[error("local Newton solve at center {center} did not converge (gradient norm {grad_norm:e})")]
    InnerNoConvergence { center: usize, grad_norm: f64 },
    #[error("one-dimensional search failed for target {0}")]
    LineSearchFailure(f64),
    #[error("b = {0} is too large for order enumeration")]
    BlockCountTooLarge(usize),
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("iterates diverged at iteration {0}")]
    Divergence(usize),
    #[error("Hessian is singular")]
    SingularHessian,
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("invalid labels: {0}")]
    InvalidLabels(String),
    #[error("unknown method '{0}'")]
    UnknownMethod(String),
    #[error("method '{method}' does not support {what}")]
    Unsupported { method: String, what: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
