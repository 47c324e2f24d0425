use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("root iteration did not converge (residual {residual:e} after {iterations} iterations)")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("node budget exceeded: {requested} nodes requested, cap is {cap}")]
    BudgetExceeded { requested: u128, cap: usize },
    #[error("query point {0} lies on the computed postcritical set")]
    PostcriticalQuery(Complex64),
    #[error("query point {0} lies on the singular set of the map")]
    SingularQuery(Complex64),
    #[error("fixed point is not repelling: |multiplier| = {0}")]
    NotRepelling(f64),
    #[error("no injectivity radius at or above 1e-6 passed the sampled checks")]
    DegenerateRadius,
    #[error("orbit exceeded 1e150 while evaluating at {0}")]
    OverflowEscape(Complex64),
    #[error("maximum modulus {max_modulus:e} at radius {radius} is too small to take log log")]
    InsufficientGrowth { radius: f64, max_modulus: f64 },
    #[error("a preimage landed on a pole of the quadratic differential at {0}")]
    PoleHit(Complex64),
    #[error("point {0} failed Siegel-disc validation: {1}")]
    SiegelValidationFailed(Complex64, String),
    #[error("sample with |sigma| below 1e-300 at w = {0}")]
    ZeroSample(Complex64),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::PostcriticalQuery(_) => "PostcriticalQuery",
            Error::SingularQuery(_) => "SingularQuery",
            Error::NotRepelling(_) => "NotRepelling",
            Error::DegenerateRadius => "DegenerateRadius",
            Error::OverflowEscape(_) => "OverflowEscape",
            Error::InsufficientGrowth { .. } => "InsufficientGrowth",
            Error::PoleHit(_) => "PoleHit",
            Error::SiegelValidationFailed(..) => "SiegelValidationFailed",
            Error::ZeroSample(_) => "ZeroSample",
        }
    }
}
