//! Minimal dense and sparse linear algebra used by the coarse direct solve
//! and by the desk-scale verification oracles.
//!
//! Everything here is written for clarity and determinism at small sizes
//! (<= a few thousand unknowns), not for large-scale performance.

pub mod dense;
pub mod sparse;

pub use dense::{DMat, LuFactors};
pub use sparse::CsrMatrix;
