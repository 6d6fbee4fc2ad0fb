use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An integrand returned NaN or infinity at a quadrature node.
    #[error("non-finite value {value} at node sigma = {node}")]
    Evaluation { node: f64, value: f64 },

    #[error("cumulant order {0} is not supported (1..=10)")]
    UnsupportedOrder(usize),

    #[error("no even order k in 4..={k_max} has a cumulant below -{tol}; cumulants = {cumulants:?}")]
    KNotFound {
        k_max: usize,
        tol: f64,
        cumulants: Vec<f64>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("out of scope: {0}")]
    OutOfScope(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("no convergence after {iterations} iterations (last residual {last:.3e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("fit window too wide: m_plus = 0 at control value {0}")]
    WindowTooWide(f64),

    #[error("state space too large: {states} configurations exceed the limit {limit}")]
    Capacity { states: u128, limit: u128 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::Domain(_)
            | Error::Degenerate(_)
            | Error::OutOfScope(_)
            | Error::Unsupported(_)
            | Error::Json(_) => 2,
            Error::Solver(_) | Error::NonConvergence { .. } | Error::WindowTooWide(_) => 3,
            Error::Capacity { .. } => 4,
            Error::Integration(_) | Error::Evaluation { .. } => 5,
            Error::UnsupportedOrder(_) | Error::KNotFound { .. } => 3,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}
