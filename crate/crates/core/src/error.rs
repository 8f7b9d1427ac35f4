use thiserror::Error;

use crate::design::DesignReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("graph generation gave up after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    #[error("graph is not connected")]
    Disconnected,

    #[error("shift kind `{0}` requires an undirected graph")]
    ShiftKind(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("entry ({row}, {col}) is non-zero but outside the sparsity pattern")]
    Pattern { row: usize, col: usize },

    #[error("shift is numerically non-diagonalizable (reconstruction error {residual:.3e})")]
    NonDiagonalizable { residual: f64 },

    #[error("covariance is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("covariance must be positive definite for worst-case designs")]
    NotPositiveDefinite,

    #[error("complex coefficients do not yield a real operator (max imaginary part {0:.3e})")]
    NotReal(f64),

    #[error("target is not perfectly implementable: {0}")]
    Infeasible(String),

    #[error("solver stopped after {iterations} iterations with relative gap {gap:.3e}")]
    Convergence {
        iterations: usize,
        gap: f64,
        best: Box<DesignReport>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("certificate failed: {0}")]
    Certificate(String),

    #[error("topology mismatch: {0}")]
    Topology(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonDiagonalizable { .. }
                | Error::NotReal(_)
                | Error::Convergence { .. }
                | Error::Certificate(_)
                | Error::Infeasible(_)
        )
    }
}
