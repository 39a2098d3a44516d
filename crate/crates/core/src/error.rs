use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a formula (non-positive frequency, power, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set that is syntactically fine but physically inconsistent.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("steady state did not converge after {iterations} iterations (last residual {:.3e})", residuals.last().copied().unwrap_or(f64::NAN))]
    NonConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("singular steady-state denominator |d| = {magnitude:.3e} in the {mode} equation")]
    SingularDenominator { mode: &'static str, magnitude: f64 },

    #[error("linear system singular at omega = {omega} (condition estimate {condition:.3e})")]
    SingularSystem { omega: f64, condition: f64 },

    #[error("eigensolver failed for drift matrix:\n{dump}")]
    Eigensolver { dump: String },

    #[error("Lyapunov solve failed: {0}")]
    Lyapunov(String),

    /// An output value that violates an invariant the construction guarantees.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("sweep point {index}: {source}")]
    AtGridPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by the user's input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidParams(_) | Error::Domain(_)
        )
    }
}
