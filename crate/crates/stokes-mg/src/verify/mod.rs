//! Assembled-matrix oracles and dense spectral diagnostics at desk scale.
//!
//! Everything in this module exists to check the matrix-free solve path
//! against an independent classical route: sparse assembly of all blocks,
//! exact and approximate Schur diagonals, the smoother scaling
//! inequalities, discrete inf-sup constants, mesh-dependent norms and the
//! smoothing/approximation-property measurements. Oracle code favours
//! clarity over speed and is guarded to small problem sizes.

mod assemble;
mod infsup;
mod norms;
mod spectral;

pub use assemble::{assemble, diag_sd, AssembledSystem, ASSEMBLY_GUARD};
pub use infsup::{check_bp_global_sparse, check_infsup, InfSupReport};
pub use norms::{
    dense_iteration_matrix, measure_approximation_property, measure_smoothing_property,
    measure_two_grid_norm, xnorm, xnorm_dual, ApproximationRow, SmoothingReport, SmoothingRow,
};
pub use spectral::{
    check_spectral_inequalities, dense_a_hat, dense_s_hat, dense_s_tilde, exact_schur_diag,
    SpectralReport,
};
