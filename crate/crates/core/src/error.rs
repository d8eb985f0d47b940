use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("nonlinearity is not integrable at infinity: {0}")]
    Integrability(String),
    #[error("quadrature failed on [{a}, {b}]: tolerance not met at maximum depth")]
    Quadrature { a: f64, b: f64 },
    #[error("root finding failed: {0}")]
    RootFind(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("field is not positive at node ({i}, {j}): u = {value}")]
    Positivity { i: usize, j: usize, value: f64 },
    #[error("Newton iteration did not converge within {iterations} iterations (residual {residual:e}, delta {delta:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        delta: f64,
    },
    #[error("line search could not keep the iterate above the positivity floor (delta {delta:e}, iteration {iteration})")]
    PositivityLoss { delta: f64, iteration: usize },
    #[error("singular Jacobian: zero pivot at row {row}")]
    SingularJacobian { row: usize },
    #[error("window error: {0}")]
    Window(String),
    #[error("directional derivative is not positive at node ({i}, {j}): {value:e}")]
    Sign { i: usize, j: usize, value: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
