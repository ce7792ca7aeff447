use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The path Hamiltonian diverges at this point (e.g. B_z -> infinity).
    #[error("singular path point at lambda = {lambda}")]
    SingularPoint { lambda: f64 },

    /// Step halving did not reach the tolerance. Carries the spectral-norm
    /// distance between the last two iterates and the substep count reached.
    #[error("no convergence in {context}: last change {last_change:.3e} after {substeps} substeps")]
    NonConvergence {
        context: String,
        last_change: f64,
        substeps: usize,
    },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("trajectory with seed {seed} failed: {source}")]
    Trajectory {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonConvergence { .. } => true,
            Error::Trajectory { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
