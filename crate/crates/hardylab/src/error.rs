use thiserror::Error;

/// Errors shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `λ` above the critical constant `λ(N) = N²/4` is rejected: every
    /// assembled form assumes `λ ≤ λ(N)`.
    #[error(
        "lambda = {lambda} exceeds the critical Hardy constant lambda({dimension}) = N^2/4 = {limit}"
    )]
    SupercriticalLambda {
        lambda: f64,
        dimension: usize,
        limit: f64,
    },

    /// A field or boundary field does not belong to the grid it is used with.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An iterative solver ran out of iterations.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A matrix expected to be positive definite is not.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),
}
