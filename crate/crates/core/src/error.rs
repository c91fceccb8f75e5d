use thiserror::Error;

/// Errors produced by the numerical routines and the scenario front end.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("matrix is not Hermitian: entry ({row}, {col}) deviates from its conjugate-transpose partner by {deviation:e}")]
    NotHermitian { row: usize, col: usize, deviation: f64 },

    #[error("Hermitian eigendecomposition of a {dim}x{dim} matrix did not converge")]
    NoConvergence { dim: usize },

    #[error("matrix function is not finite at eigenvalue {eigenvalue:e}")]
    FunctionDomain { eigenvalue: f64 },

    #[error("state not full rank: eigenvalue {eigenvalue:e} is below the rank floor {floor:e}")]
    NotFullRank { eigenvalue: f64, floor: f64 },

    #[error("state is not normalized: trace {trace} differs from 1")]
    NotNormalized { trace: f64 },

    #[error("derivative is not trace-preserving: tr(rho * dG) = {value:e}")]
    NotTracePreserving { value: f64 },

    #[error("series divergent: spectral spread {spread} >= pi, use the eigenbasis route instead")]
    SeriesDivergent { spread: f64 },

    #[error("bound undefined: Fisher information {qfi} is not positive")]
    BoundUndefined { qfi: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("unphysical covariance: symplectic eigenvalue {symplectic_eigenvalue} < 1")]
    UnphysicalCovariance { symplectic_eigenvalue: f64 },

    #[error("pure or near-pure mode: generator form diverges (symplectic eigenvalue {symplectic_eigenvalue})")]
    PureMode { symplectic_eigenvalue: f64 },

    #[error("SLD undefined: purity-breaking derivative on pure mode (residual {residual:e})")]
    PurityBreaking { residual: f64 },

    #[error("increase truncation: trace leakage {leakage:e} exceeds budget {budget:e} at dimension {dim}")]
    Truncation { leakage: f64, budget: f64, dim: usize },

    #[error("increase truncation: oracle result moved by {shift:e} when the truncation grew past {dim}")]
    NotConverged { shift: f64, dim: usize },

    #[error("theta = {theta} is outside the family domain: {reason}")]
    OutOfDomain { theta: f64, reason: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("routes disagree: {0}")]
    RouteMismatch(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    ///
    /// Malformed input maps to 2, numerical-domain failures to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_)
            | Error::NotHermitian { .. }
            | Error::Validation(_)
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
