//! Self-defense investment and cyber-insurance contract solvers for
//! networked users, with brute-force and Monte Carlo cross-checks.

pub mod asym;
pub mod cli;
pub mod contract;
pub mod error;
pub mod invest;
pub mod model;
pub mod oracle;
mod roots;

pub use asym::*;
pub use contract::*;
pub use error::{Error, Result};
pub use invest::*;
pub use model::*;
pub use oracle::*;
