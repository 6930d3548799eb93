use thiserror::Error;

/// Errors raised by the solvers and their supporting routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("iterate outside the strictly feasible region: {0}")]
    DomainViolation(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("Lipschitz constants (L0, L1, L2) are required for fixed step sizes")]
    ConstantsRequired,
    #[error("line search stalled below alpha floor {alpha_floor:e} ({procedure})")]
    LineSearchStall { procedure: String, alpha_floor: f64 },
    #[error("generation failed: {0}")]
    GenerationFailed(String),
}

pub type Result<T> = std::result::Result<T, SolverError>;
