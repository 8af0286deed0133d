//! Hybrid parallel sparse LU factorization and solve.

pub mod cli;
pub mod error;
pub mod matrix;
pub mod numeric;
pub mod preprocess;
pub mod sched;
pub mod trisolve;

pub use error::{Error, Result};
pub use matrix::{CsrMatrix, Triplet};
