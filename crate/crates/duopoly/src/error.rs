use thiserror::Error;

/// Errors surfaced by market construction, solvers, scenario compilation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("market must contain at least one user")]
    EmptyMarket,

    #[error("duplicate user id {0}")]
    DuplicateUserId(usize),

    #[error("user {id}: {field} must be positive (got {value})")]
    NonPositiveUserField {
        id: usize,
        field: &'static str,
        value: f64,
    },

    #[error("provider {id}: supply must be positive (got {supply})")]
    NonPositiveSupply { id: u8, supply: f64 },

    #[error(
        "users {first} and {second} share the preference ratio alpha = {alpha}; \
         the equilibrium search requires strictly distinct ratios"
    )]
    AlphaTie {
        first: usize,
        second: usize,
        alpha: f64,
    },

    #[error(
        "optimal price ratio {ratio} lands exactly on a preference boundary \
         (interval {interval}); no equilibrium convention is defined for this case"
    )]
    DegenerateBoundary { interval: usize, ratio: f64 },

    #[error("user at position {position} does not satisfy the undecided-user condition")]
    NotUndecided { position: usize },

    #[error(
        "undecided user {id} has zero demand toward provider {provider} over the \
         candidate price range; the split construction does not apply"
    )]
    DegenerateSplit { id: usize, provider: u8 },

    #[error("{what}: tolerance {tol} not reachable in {iterations} bisection steps")]
    IterationCap {
        what: &'static str,
        tol: f64,
        iterations: usize,
    },

    #[error("{what} did not converge: residual {residual} exceeds tolerance {tol}")]
    Convergence {
        what: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("exhaustive oracle supports at most {cap} users (got {size})")]
    OracleCap { size: usize, cap: usize },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("unknown tolerance name {0:?}")]
    UnknownTolerance(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
