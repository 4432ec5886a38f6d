use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "rest point search did not converge after {iterations} iterations \
         (residual {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64, last: Vec<f64> },

    #[error("singular jacobian (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("rest point not elliptic: eigenvalue {re:e} + {im:e}i off the imaginary axis")]
    NotElliptic { re: f64, im: f64 },

    #[error("degenerate frequencies {first} and {second} (pairing tolerance {tolerance:e})")]
    Degenerate { first: f64, second: f64, tolerance: f64 },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("positivity margin {margin:e} below threshold at t = {t}")]
    PositivityAbort { t: f64, margin: f64 },

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Singular { .. } => "singular",
            Error::NotElliptic { .. } => "not_elliptic",
            Error::Degenerate { .. } => "degenerate",
            Error::AssumptionViolated(_) => "assumption_violated",
            Error::PositivityAbort { .. } => "positivity_abort",
            Error::Internal(_) => "internal",
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
