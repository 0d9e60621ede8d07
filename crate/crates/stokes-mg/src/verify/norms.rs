//! Mesh-dependent norms and the dense smoothing/approximation-property
//! measurements.
//!
//! The X norm weighs the velocity block by h^{d-2} and the pressure block
//! by h^d; its dual uses the inverse weight pair. Operator norms between
//! these spaces are spectral norms of diagonally sandwiched dense matrices
//! restricted to the active subspace (constrained dofs masked).

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::Result;
use crate::fespace::{pressure_mean_project, BlockVector, DofMap};
use crate::linalg::DMat;
use crate::mesh::MeshHierarchy;
use crate::mfoperator::ApplyMode;
use crate::multigrid::Hierarchy;
use crate::smoother::{eta0, UzawaSmoother};
use crate::verify::assemble::{assemble, AssembledSystem};
use crate::verify::spectral::{dense_a_hat, dense_s_hat, dense_s_tilde};

/// Mesh-dependent norm (h^{d-2} |v|^2 + h^d |q|^2)^{1/2}.
pub fn xnorm(dofmap: &DofMap, x: &BlockVector) -> f64 {
    let d = dofmap.dim as i32;
    let wu = dofmap.h.powi(d - 2);
    let wp = dofmap.h.powi(d);
    let nu: f64 = x.u.iter().map(|v| v * v).sum();
    let np: f64 = x.p.iter().map(|v| v * v).sum();
    (wu * nu + wp * np).sqrt()
}

/// Dual norm with the inverse weight pair.
pub fn xnorm_dual(dofmap: &DofMap, x: &BlockVector) -> f64 {
    let d = dofmap.dim as i32;
    let wu = dofmap.h.powi(-(d - 2));
    let wp = dofmap.h.powi(-d);
    let nu: f64 = x.u.iter().map(|v| v * v).sum();
    let np: f64 = x.p.iter().map(|v| v * v).sum();
    (wu * nu + wp * np).sqrt()
}

/// Per-dof X weights (h^{d-2} for velocity, h^d for pressure entries).
fn xweights(dofmap: &DofMap) -> Vec<f64> {
    let d = dofmap.dim as i32;
    let wu = dofmap.h.powi(d - 2);
    let wp = dofmap.h.powi(d);
    let n = dofmap.n_velocity();
    let m = dofmap.n_pressure();
    let mut w = vec![wu; n + m];
    for item in w.iter_mut().skip(n) {
        *item = wp;
    }
    w
}

/// Norm direction of a weighted operator norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NormKind {
    /// ||T||_{L(X, X*)} = ||W^{-1/2} T W^{-1/2}||_2
    XToDual,
    /// ||T||_{L(X*, X)} = ||W^{1/2} T W^{1/2}||_2
    DualToX,
    /// ||T||_{L(X, X)} = ||W^{1/2} T W^{-1/2}||_2
    XToX,
}

/// Weighted spectral norm on the active subspace (constrained velocity
/// rows/columns masked out).
fn weighted_norm(t: &DMat, dofmap: &DofMap, kind: NormKind) -> f64 {
    let w = xweights(dofmap);
    let n_total = w.len();
    debug_assert_eq!(t.nrows, n_total);
    let d = dofmap.dim;
    let mut active = vec![true; n_total];
    for node in 0..dofmap.n_scalar_v {
        if dofmap.dirichlet[node] {
            for c in 0..d {
                active[node * d + c] = false;
            }
        }
    }
    let (row_s, col_s): (Vec<f64>, Vec<f64>) = match kind {
        NormKind::XToDual => (
            w.iter().map(|x| 1.0 / x.sqrt()).collect(),
            w.iter().map(|x| 1.0 / x.sqrt()).collect(),
        ),
        NormKind::DualToX => (
            w.iter().map(|x| x.sqrt()).collect(),
            w.iter().map(|x| x.sqrt()).collect(),
        ),
        NormKind::XToX => (
            w.iter().map(|x| x.sqrt()).collect(),
            w.iter().map(|x| 1.0 / x.sqrt()).collect(),
        ),
    };
    let mut s = DMat::zeros(n_total, n_total);
    for i in 0..n_total {
        if !active[i] {
            continue;
        }
        for j in 0..n_total {
            if active[j] {
                s[(i, j)] = row_s[i] * t[(i, j)] * col_s[j];
            }
        }
    }
    s.spectral_norm()
}

/// Densify the smoother iteration matrix S = I - Khat^{-1} K from its
/// behavioral action (one step with zero right-hand side per unit vector).
pub fn dense_iteration_matrix(sm: &UzawaSmoother) -> DMat {
    let dm = &sm.op.dofmap;
    let n_total = dm.n_total();
    let zero = BlockVector::zeros(dm);
    let mut s = DMat::zeros(n_total, n_total);
    let mut e = vec![0.0; n_total];
    for j in 0..n_total {
        e[j] = 1.0;
        let mut x = BlockVector::from_flat(dm, &e);
        e[j] = 0.0;
        sm.step(&mut x, &zero);
        s.set_col(j, &x.to_flat());
    }
    s
}

fn mat_pow(s: &DMat, m: usize) -> DMat {
    let mut result = DMat::identity(s.nrows);
    let mut base = s.clone();
    let mut e = m;
    while e > 0 {
        if e & 1 == 1 {
            result = result.matmul(&base);
        }
        e >>= 1;
        if e > 0 {
            base = base.matmul(&base);
        }
    }
    result
}

/// One row of the smoothing-property table.
#[derive(Debug, Clone)]
pub struct SmoothingRow {
    pub m: usize,
    /// ||K S^m||_{L(X, X*)}.
    pub norm_ksm: f64,
    /// norm_ksm / (eta0(m-1) ||Khat - K||); None for m = 0.
    pub eta_ratio: Option<f64>,
}

/// Smoothing-property measurement of one level/smoother.
#[derive(Debug, Clone)]
pub struct SmoothingReport {
    pub rows: Vec<SmoothingRow>,
    /// ||Khat - K||_{L(X, X*)} = max(h^{-(d-2)} |Ahat-A|, h^{-d} |Shat-S~|).
    pub norm_khat_minus_k: f64,
}

/// Dense computation of ||K S^m|| in the mesh-dependent norms for each m,
/// reported against the eta_0 envelope.
pub fn measure_smoothing_property(
    sys: &AssembledSystem,
    sm: &UzawaSmoother,
    m_list: &[usize],
) -> Result<SmoothingReport> {
    let dm = &sys.dofmap;
    let d = dm.dim as i32;
    let k = sys.dense_k(ApplyMode::Residual);
    let s = dense_iteration_matrix(sm);

    // ||Khat - K|| from the diagonal gap blocks on the active subspace.
    let a = sys.dense_a(ApplyMode::Smoothing);
    let mut gap_a = dense_a_hat(sm)?;
    gap_a.add_scaled(-1.0, &a);
    // Mask constrained rows/cols (both blocks are identity there).
    let dim = dm.dim;
    for node in 0..dm.n_scalar_v {
        if dm.dirichlet[node] {
            for c in 0..dim {
                let dof = node * dim + c;
                for j in 0..gap_a.ncols {
                    gap_a[(dof, j)] = 0.0;
                    gap_a[(j, dof)] = 0.0;
                }
            }
        }
    }
    let mut gap_s = dense_s_hat(sm)?;
    gap_s.add_scaled(-1.0, &dense_s_tilde(sm));
    let norm_khat_minus_k = (dm.h.powi(-(d - 2)) * gap_a.spectral_norm())
        .max(dm.h.powi(-d) * gap_s.spectral_norm());

    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let sm_pow = mat_pow(&s, m);
        let ksm = k.matmul(&sm_pow);
        let norm_ksm = weighted_norm(&ksm, dm, NormKind::XToDual);
        let eta_ratio = if m >= 1 {
            Some(norm_ksm / (eta0(m - 1) * norm_khat_minus_k))
        } else {
            None
        };
        rows.push(SmoothingRow {
            m,
            norm_ksm,
            eta_ratio,
        });
    }
    Ok(SmoothingReport {
        rows,
        norm_khat_minus_k,
    })
}

/// One measured level pair of the approximation property.
#[derive(Debug, Clone)]
pub struct ApproximationRow {
    pub fine_level: usize,
    /// ||C_l^{l-1} K_l^{-1}||_{L(X*, X)}.
    pub norm: f64,
}

/// Regularized dense inverse of the convention-applied K of one level.
struct RegularizedInverse {
    lu: crate::linalg::LuFactors,
    dofmap: Arc<DofMap>,
    mean: bool,
}

impl RegularizedInverse {
    fn build(sys: &AssembledSystem, mean: bool) -> Result<Self> {
        let mut k = sys.dense_k(ApplyMode::Smoothing);
        let n = sys.dofmap.n_velocity();
        let m = sys.dofmap.n_pressure();
        if mean {
            let mut scale: f64 = 0.0;
            for i in 0..n + m {
                scale = scale.max(k[(i, i)].abs());
            }
            let gamma = scale.max(1.0) / m as f64;
            for i in 0..m {
                for j in 0..m {
                    k[(n + i, n + j)] += gamma;
                }
            }
        }
        Ok(RegularizedInverse {
            lu: k.lu()?,
            dofmap: sys.dofmap.clone(),
            mean,
        })
    }

    fn apply(&self, r: &BlockVector) -> BlockVector {
        let mut rhs = r.clone();
        self.dofmap.zero_constrained(&mut rhs.u);
        if self.mean {
            pressure_mean_project(&self.dofmap, &mut rhs.p);
        }
        let x = self.lu.solve(&rhs.to_flat());
        let mut out = BlockVector::from_flat(&self.dofmap, &x);
        if self.mean {
            pressure_mean_project(&self.dofmap, &mut out.p);
        }
        out
    }
}

/// Dense measurement of ||(I - P K_{l-1}^{-1} R K_l) K_l^{-1}|| in the
/// L(X*, X) norm for each requested fine level of the hierarchy.
pub fn measure_approximation_property(
    meshes: &MeshHierarchy,
    hier: &Hierarchy,
    fine_levels: &[usize],
) -> Result<Vec<ApproximationRow>> {
    let mut rows = Vec::with_capacity(fine_levels.len());
    for &l in fine_levels {
        assert!(l >= 1 && l < hier.n_levels());
        let sys_f = assemble(
            &meshes.levels[l],
            hier.dofmaps[l].clone(),
            hier.operators[l].mu,
            hier.operators[l].gamma_rho,
        )?;
        let sys_c = assemble(
            &meshes.levels[l - 1],
            hier.dofmaps[l - 1].clone(),
            hier.operators[l].mu,
            hier.operators[l].gamma_rho,
        )?;
        let inv_f = RegularizedInverse::build(&sys_f, hier.pressure_mean)?;
        let inv_c = RegularizedInverse::build(&sys_c, hier.pressure_mean)?;
        let dm_f = &hier.dofmaps[l];
        let n_total = dm_f.n_total();
        let mut t = DMat::zeros(n_total, n_total);
        let mut e = vec![0.0; n_total];
        for j in 0..n_total {
            e[j] = 1.0;
            let rhs = BlockVector::from_flat(dm_f, &e);
            e[j] = 0.0;
            // z = K_f^{-1} e_j on the active subspace.
            let z = inv_f.apply(&rhs);
            // C z = z - P K_c^{-1} R K_f z.
            let kz = hier.operators[l].apply_k(&z, ApplyMode::Residual)?;
            let rz = hier.restrict(l, &kz);
            let wc = inv_c.apply(&rz);
            let pw = hier.prolongate(l, &wc);
            let mut col = z.clone();
            col.axpy(-1.0, &pw);
            t.set_col(j, &col.to_flat());
        }
        let norm = weighted_norm(&t, dm_f, NormKind::DualToX);
        rows.push(ApproximationRow {
            fine_level: l,
            norm,
        });
    }
    Ok(rows)
}

/// ||C S^m||_{L(X, X)}: measured two-grid contraction without
/// post-smoothing (used to cross-check the product bound).
pub fn measure_two_grid_norm(
    meshes: &MeshHierarchy,
    hier: &Hierarchy,
    level: usize,
    m: usize,
) -> Result<f64> {
    let sys_f = assemble(
        &meshes.levels[level],
        hier.dofmaps[level].clone(),
        hier.operators[level].mu,
        hier.operators[level].gamma_rho,
    )?;
    let sys_c = assemble(
        &meshes.levels[level - 1],
        hier.dofmaps[level - 1].clone(),
        hier.operators[level].mu,
        hier.operators[level].gamma_rho,
    )?;
    let inv_c = RegularizedInverse::build(&sys_c, hier.pressure_mean)?;
    let dm_f = &hier.dofmaps[level];
    let sm = hier.smoother(level).expect("level >= 1");
    let s = dense_iteration_matrix(sm);
    let s_m = mat_pow(&s, m);
    let n_total = dm_f.n_total();
    let mut t = DMat::zeros(n_total, n_total);
    for j in 0..n_total {
        let smcol = s_m.col(j);
        let y = BlockVector::from_flat(dm_f, &smcol);
        let ky = hier.operators[level].apply_k(&y, ApplyMode::Residual)?;
        let ry = hier.restrict(level, &ky);
        let wc = inv_c.apply(&ry);
        let pw = hier.prolongate(level, &wc);
        let mut col = y.clone();
        col.axpy(-1.0, &pw);
        t.set_col(j, &col.to_flat());
    }
    let _ = sys_f;
    Ok(weighted_norm(&t, dm_f, NormKind::XToX))
}
