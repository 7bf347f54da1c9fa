use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cubic roots coincide within {tol:e} (ν = {nu}); at or near a saddle-node bifurcation")]
    DegenerateRoots { nu: f64, tol: f64 },

    #[error("point {re} + {im}i is not a fixed point (residual {residual:e})")]
    NotAFixedPoint { re: f64, im: f64, residual: f64 },

    #[error("non-finite state at t = {t}; reduce the time step")]
    NonFinite { t: f64 },

    #[error("no root-count transition in ν ∈ [{nu_min}, {nu_max}]")]
    NotBracketed { nu_min: f64, nu_max: f64 },

    #[error("system is not bistable at ν = {nu} ({count} root(s))")]
    NotBistable { nu: f64, count: usize },

    #[error("Fock truncation N = {dim} breached: tail weight {tail:e} exceeds {limit:e}")]
    TruncationBreach { dim: usize, tail: f64, limit: f64 },

    #[error("dense Liouvillian for N = {dim} exceeds the budget (N ≤ {max_dim})")]
    BudgetExceeded { dim: usize, max_dim: usize },

    #[error("eigensolver failure: {0}")]
    EigensolverFailure(String),

    #[error("spectrum is degenerate: |Re λ1| = {rate:e} is below the zero-mode tolerance {tol:e}")]
    DegenerateSpectrum { rate: f64, tol: f64 },

    #[error("only {escapes} escapes observed (need {required}); escape rate ≤ {rate_upper_bound:e}")]
    InsufficientEvents {
        escapes: usize,
        required: usize,
        rate_upper_bound: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::EigensolverFailure(e.to_string())
    }
}

/// Process exit status for each error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const BUDGET: i32 = 4;
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Config(_) => exit::CONFIG,
            Error::BudgetExceeded { .. } => exit::BUDGET,
            Error::Io(_) => exit::IO,
            _ => exit::NUMERICAL,
        }
    }
}
