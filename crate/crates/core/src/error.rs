use alloc::string::String;

/// Errors raised by every module of the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("probabilities sum to {sum}, outside the renormalization tolerance")]
    NotNormalized { sum: f64 },

    #[error("{what} has {cols} columns, above the brute-force cap of {cap}; use the sampled variant")]
    BruteForceCap { what: &'static str, cols: usize, cap: usize },

    #[error("SDP solver did not converge after {iterations} iterations (last duality gap {gap:e})")]
    SolverNonConvergence { iterations: usize, gap: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -1e-8")]
    NotPsd { eigenvalue: f64 },

    #[error("problem too large: block dimension {dim} exceeds {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("dual degenerate: {0}")]
    DualDegenerate(String),

    #[error("property check failed: {0}")]
    PropertyViolation(String),

    #[error("{0}")]
    NotRealizable(String),

    #[error("mass below cutoff: every value is at most {cutoff}")]
    MassBelowCutoff { cutoff: f64 },

    #[error("unsupported for randomizer kind {0}")]
    UnsupportedKind(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
