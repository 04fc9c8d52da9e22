use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QslError {
    #[error("matrix is not Hermitian (‖A − A†‖_F = {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPsd { eigenvalue: f64 },
    #[error("trace is {trace}, expected 1")]
    TraceNotOne { trace: f64 },
    #[error("matrix is not square ({rows}×{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {expected} vs {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("rank mismatch: {expected} vs {found}")]
    RankMismatch { expected: usize, found: usize },
    #[error("state is not pure (rank {rank})")]
    NotPure { rank: usize },
    #[error("states are not isospectral")]
    NotIsospectral,
    #[error("energy uncertainty must be positive, got {0}")]
    NonpositiveUncertainty(f64),
    #[error("matrix is not a projector (‖P² − P‖_F = {residual:.3e})")]
    NotProjector { residual: f64 },
    #[error("columns are not orthonormal (‖F†F − 1‖_F = {residual:.3e})")]
    NotOrthonormal { residual: f64 },
    #[error("Gram matrix W†W is singular (smallest eigenvalue {0:.3e})")]
    SingularGram(f64),
    #[error("amplitude is invalid: {0}")]
    InvalidAmplitude(String),
    #[error("rank {rank} exceeds half the dimension {dim}")]
    RankTooLarge { rank: usize, dim: usize },
    #[error("permutation is not an involution")]
    NotInvolution,
    #[error("invalid permutation of length {0}")]
    InvalidPermutation(usize),
    #[error("state has a degenerate spectrum")]
    Degenerate,
    #[error("observable is not horizontal at the state (residual {0:.3e})")]
    NotHorizontal(f64),
    #[error("metric precondition violated: {0}")]
    MetricPrecondition(String),
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, QslError>;
