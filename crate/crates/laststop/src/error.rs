use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Function evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series did not meet its tolerance within the term budget.
    #[error("series did not converge: {terms} terms, tail bound {tail_bound:e}, tol {tol:e}")]
    NonConvergence {
        terms: usize,
        tail_bound: f64,
        tol: f64,
    },

    /// Root bracketing failed: the defect has one sign on the whole interval.
    #[error("no sign change on (0,1) for root index k={k}")]
    NoSignChange { k: usize },

    /// The computed root sequence contradicts the expected monotonicity class.
    #[error("cutoff monotonicity mismatch: expected {expected}, classified {found}")]
    MonotonicityMismatch { expected: String, found: String },

    /// A winning-probability formula was applied to a non-monotone cutoff vector.
    #[error("strategy cutoffs are not nonincreasing; formula requires the monotone case")]
    NonMonotoneStrategy,

    /// The value-function grid failed its step-halving accuracy check.
    #[error("grid too coarse: Richardson check error {err:e} exceeds {limit:e}")]
    GridTooCoarse { err: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
