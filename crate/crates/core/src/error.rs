use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A dimension or parameter falls outside the operation's preconditions.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A value is outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("rank deficiency: expected rank {expected}, found {found}")]
    Rank { expected: usize, found: usize },

    /// The signal/noise eigenvalue split has no usable gap.
    #[error("degenerate signal/noise split: eigen-gap {gap:e} below threshold")]
    DegenerateSplit { gap: f64 },

    /// The numerical kernel of the quadratic form does not have the expected dimension.
    #[error("kernel dimension mismatch: expected {expected}, eigenvalues suggest {found}")]
    OvermodelAmbiguity { expected: usize, found: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no feasible exponent found on the search grid (margin {margin_at_min_p} at p = {min_p})")]
    NotFound { min_p: f64, margin_at_min_p: f64 },

    #[error("no coordinate functional yields a feasible normalization")]
    Normalization,

    #[error("linear program {0}")]
    Lp(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
