use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not antisymmetric (max |q + q^T| = {defect:e})")]
    NotAntisymmetric { defect: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The Euler-Maruyama recursion produced a non-finite state.
    #[error("integration diverged at step {step}{}: state {state:?}", seed.map(|s| format!(" (seed {s})")).unwrap_or_default())]
    Divergence {
        step: usize,
        state: Vec<f64>,
        seed: Option<u64>,
    },

    #[error("horizon too short for batch means: need at least {min_time} time units, have {total_time}")]
    HorizonTooShort { min_time: f64, total_time: f64 },

    #[error("restricted generator is not positive definite (smallest eigenvalue {smallest:e})")]
    NotPositiveDefinite { smallest: f64 },

    #[error("perturbed generator is singular on the mean-zero subspace")]
    SingularGenerator,

    #[error("state space has {n} states, limit is {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("eigendecomposition failed to converge")]
    Eigen,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Whether the error came from a numerical blow-up rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::SingularGenerator
                | Error::Eigen
        )
    }
}
