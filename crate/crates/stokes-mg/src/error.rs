//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A cell mapping produced a non-positive Jacobian determinant.
    InvalidGeometry { cell: usize, detail: &'static str },
    /// Vector or operator level/size mismatch.
    DimensionMismatch { expected: usize, got: usize },
    /// Taylor-Hood spaces require velocity degree k >= 2.
    UnsupportedDegree(usize),
    /// A diagonal used as Jacobi preconditioner has a zero/negative entry.
    SingularDiagonal(usize),
    /// Spectral-radius estimation produced a non-finite iterate.
    EstimationFailure,
    /// Coarse factorization failed (matrix numerically singular).
    SingularFactorization,
    /// A desk-scale size guard was exceeded.
    GuardExceeded { size: usize, limit: usize },
    /// Malformed mesh data file.
    MeshFormat(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGeometry { cell, detail } => {
                write!(f, "invalid geometry in cell {cell}: {detail}")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::UnsupportedDegree(k) => {
                write!(f, "unsupported velocity degree k={k} (need k >= 2)")
            }
            Error::SingularDiagonal(i) => write!(f, "non-positive diagonal entry at index {i}"),
            Error::EstimationFailure => write!(f, "spectral radius estimation failed"),
            Error::SingularFactorization => write!(f, "singular factorization"),
            Error::GuardExceeded { size, limit } => {
                write!(f, "size guard exceeded: {size} > {limit}")
            }
            Error::MeshFormat(msg) => write!(f, "mesh file format error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
