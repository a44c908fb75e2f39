use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("singular matrix (pivot {index})")]
    Singular { index: usize },
    #[error("singular bordered system (Schur complement {schur:e})")]
    SingularBordered { schur: f64 },
    #[error("Newton failed to converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("map is singular for d = 0")]
    SingularMap,
    #[error("fixed point lost hyperbolicity (trace {trace})")]
    NotHyperbolic { trace: f64 },
    #[error("manifold arc-length budget exhausted after {points} points")]
    BudgetExhausted { points: usize },
    #[error("no intersection-count change in bracket [{lo}, {hi}]")]
    EmptyBracket { lo: f64, hi: f64 },
    #[error("continuation in d stopped at d = {reached:e}: {source}")]
    DContinuation {
        reached: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("pulse spec does not fit the window: {0}")]
    SpecTooLarge(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("branch switching failed after {attempts} attempts")]
    BranchSwitch { attempts: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
