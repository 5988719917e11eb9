use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not symmetric: entry ({row}, {col}) differs from its transpose")]
    NotSymmetric { row: usize, col: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("{what} failed to converge (residual {residual:.3e})")]
    Numeric { what: &'static str, residual: f64 },

    #[error("matrices do not commute (commutator norm {commutator:.3e}); not a simultaneous frame")]
    NotSimultaneousFrame { commutator: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("point is not stationary: l1 distance {gap:.3e} from the subdifferential; residual {residual:?}")]
    NotStationary { gap: f64, residual: Vec<f64> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("polyhedral function is not permutation symmetric (|θ(x) - θ(Ux)| = {gap:.3e})")]
    NotPermutationSymmetric { gap: f64 },

    #[error("linear program: {0}")]
    Lp(String),
}

pub type Result<T> = std::result::Result<T, Error>;
