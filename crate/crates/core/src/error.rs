use thiserror::Error;

/// Errors raised anywhere in the transfer pipeline.
#[derive(Debug, Error)]
pub enum PstError {
    #[error("invalid chain spec: {0}")]
    InvalidSpec(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("excitation count {k} out of range for a {n}-site register")]
    ExcitationOutOfRange { n: usize, k: usize },

    #[error("site {site} out of range 1..={n}")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("size guard exceeded: {what} = {value} > {limit}")]
    SizeGuard {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("rows are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("extended receiver too small: N_ER = {n_er_k} < required {required}")]
    Infeasible { n_er_k: usize, required: usize },

    #[error("no restart converged (best residual {best_residual:e} after {restarts} restarts)")]
    NoConvergence { best_residual: f64, restarts: usize },

    #[error("expected {expected} circuit parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },

    #[error("restoring solution is not converged (residual {0:e})")]
    Unconverged(f64),

    #[error("registration time mismatch: solution at tau = {solution}, requested {requested}")]
    TauMismatch { solution: f64, requested: f64 },

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("unknown ancilla {0}")]
    UnknownAncilla(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PstError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            PstError::Infeasible { .. } => 3,
            PstError::NoConvergence { .. } => 4,
            PstError::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, PstError>;
