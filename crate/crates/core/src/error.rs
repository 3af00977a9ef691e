use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid word: letter x{letter} outside 1..={d}")]
    InvalidWord { letter: usize, d: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("syntax error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("ill-conditioned matrix: condition number {cond:.3e} exceeds cap {cap:.3e}")]
    Conditioning { cond: f64, cap: f64 },

    #[error("point outside the domain (margin {margin:.3e})")]
    OutsideDomain { margin: f64 },

    #[error("domain spec invalid: {0}")]
    InvalidSpec(String),

    #[error("misuse: {0}")]
    Misuse(String),

    #[error("factorization infeasible: AA* - BB* has eigenvalue {min_eig:.3e}")]
    FactorizationInfeasible { min_eig: f64 },

    #[error("certificate inconsistent: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    CertificateInconsistent { residual: f64, tol: f64 },

    #[error("domain margin too small: resolvent condition number {cond:.3e}")]
    MarginTooSmall { cond: f64 },

    #[error("colligation is not a contraction: I - V*V has eigenvalue {min_eig:.3e}")]
    ContractionViolation { min_eig: f64 },

    #[error("corona condition violated: min eigenvalue of sum a_i a_i* - mu^2 is {min_eig:.3e}")]
    CoronaCondition { min_eig: f64 },

    #[error("sampling failed after {iterations} shrink iterations")]
    Sampling { iterations: usize },

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
