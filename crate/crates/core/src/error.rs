use thiserror::Error;

/// Errors produced by estimation and inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty sample")]
    EmptySample,

    #[error("non-finite value in {what} at row {row}")]
    NonFinite { what: &'static str, row: usize },

    #[error("covariate is degenerate (all values equal)")]
    DegenerateCovariate,

    #[error("cell for support point {point} has {count} observation(s); at least 2 are required")]
    SparseCell { point: String, count: usize },

    #[error("value {value} lies outside the boundary knots [{lo}, {hi}]")]
    OutsideBoundary { value: f64, lo: f64, hi: f64 },

    #[error("design matrix is rank deficient with K = {k} basis terms")]
    RankDeficient { k: usize },

    #[error("no admissible candidate in the cross-validation set")]
    NoValidCandidate,

    #[error(
        "fewer than 2 distinct observations within bandwidth {h} of grid point {point}; \
         use a larger bandwidth or a trimmed grid"
    )]
    SparseNeighborhood { point: f64, h: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("influence vector at grid index {index} has zero norm")]
    ZeroNorm { index: usize },

    #[error("level {0} is outside (0, 1)")]
    InvalidLevel(f64),

    #[error("analytic constant undefined: {0}")]
    AnalyticUndefined(String),

    #[error("levels do not match: {0} vs {1}")]
    LevelMismatch(f64, f64),

    #[error("{failed} of {total} replications failed; first error: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
