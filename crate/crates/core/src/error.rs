use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A root or fixed point that must exist was not found.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Best-response iteration did not settle.
    #[error("no convergence after {iterations} iterations (final iterates: {final_iterates:?})")]
    Convergence {
        iterations: usize,
        final_iterates: Vec<f64>,
    },

    /// An objective evaluated to NaN or infinity during a grid scan.
    #[error("non-finite objective value {value} at grid point {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
