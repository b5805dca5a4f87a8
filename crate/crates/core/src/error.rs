use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },

    #[error("field is not Hermitian symmetric (relative defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("slope condition violated: max |d_y ubar1| = {max_slope:.4} >= 1/2 (outside bootstrap regime)")]
    SlopeCondition { max_slope: f64 },

    #[error("CFL violation: cfl number {cfl:.3} exceeds limit; suggested dt = {suggested_dt:.3e}")]
    Cfl { cfl: f64, suggested_dt: f64 },

    #[error("quadrature did not converge: error estimate {estimate:.3e} > tolerance {tolerance:.3e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("missing record series `{0}`")]
    MissingSeries(String),

    #[error("record too short: spans {span:.3} time units, need {required:.3}")]
    RecordTooShort { span: f64, required: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
