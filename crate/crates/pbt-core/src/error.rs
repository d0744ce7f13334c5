use thiserror::Error;

#[derive(Debug, Error)]
pub enum PbtError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integer overflow while computing {0}")]
    Overflow(String),

    #[error("dense dimension guard exceeded: {what} needs {dim} > {limit}")]
    DimensionGuard {
        what: String,
        dim: usize,
        limit: usize,
    },

    #[error("invariant violated: {what} (residual {residual:.3e} > tolerance {tol:.1e})")]
    Invariant {
        what: String,
        residual: f64,
        tol: f64,
    },

    #[error("rank mismatch in {what}: expected {expected}, found {found}")]
    Rank {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, PbtError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(PbtError::InvalidArgument(msg.into()))
}

/// Returns an `Invariant` error when `residual > tol`.
pub(crate) fn check(what: impl Into<String>, residual: f64, tol: f64) -> Result<()> {
    if residual.is_finite() && residual <= tol {
        Ok(())
    } else {
        Err(PbtError::Invariant {
            what: what.into(),
            residual,
            tol,
        })
    }
}
