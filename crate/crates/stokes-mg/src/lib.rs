//! Matrix-free monolithic geometric multigrid for Stokes and generalized
//! Stokes saddle-point systems.
//!
//! The crate discretizes the (generalized) Stokes equations with continuous
//! Taylor-Hood `Q_k`-`Q_{k-1}` elements on nested quadrilateral/hexahedral
//! mesh hierarchies and solves the resulting symmetric indefinite systems
//! with a monolithic multigrid method. All fine-level operator applications
//! are matrix-free (sum-factorized element loops); the smoother is a
//! symmetric inexact Uzawa iteration whose approximate inverses are scaled
//! Chebyshev-Jacobi preconditioner actions.
//!
//! Module map:
//! - [`mesh`]: nested quad/hex hierarchies, uniform refinement, curved-boundary
//!   snapping, multilinear cell mappings.
//! - [`fespace`]: tensor-product Lagrange bases, degree-of-freedom numbering,
//!   Dirichlet constraints, zero-mean pressure projection.
//! - [`mfoperator`]: matrix-free action of the saddle-point operator and its
//!   blocks, plus matrix-free diagonal extraction.
//! - [`smoother`]: scaled Chebyshev-Jacobi preconditioners and the symmetric
//!   inexact Uzawa smoother.
//! - [`multigrid`]: transfers, coarse direct solve, V/W cycles, outer solve.
//! - [`verify`]: assembled sparse oracles and dense spectral diagnostics at
//!   desk scale.
//! - [`metrics`]: reduction rates, time-to-reduction and heatmap aggregation.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the companion CLI
//! crate carries file formats, timing and the benchmark driver.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod fespace;
pub mod linalg;
pub mod mesh;
pub mod metrics;
pub mod mfoperator;
pub mod multigrid;
pub mod quadrature;
pub mod smoother;
pub mod util;
pub mod verify;

pub use error::{Error, Result};
pub use fespace::BlockVector;
