//! Numerical discrete inf-sup checks: the global LBB constant, the
//! Bercovier-Pironneau generalized eigenvalue and its per-element analogue.
//!
//! All three quantities are computed densely on constrained subspaces:
//! Dirichlet velocity dofs are eliminated and the constant-pressure
//! direction is deflated where the pencil is degenerate.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fespace::DofMap;
use crate::linalg::DMat;
use crate::mesh::LevelMesh;
use crate::verify::assemble::{assemble, cell_matrices};

/// Discrete inf-sup constants of one level.
#[derive(Debug, Clone)]
pub struct InfSupReport {
    /// Discrete LBB constant: smallest nonzero generalized singular value
    /// of B in the (H1, L2) norm pair.
    pub lbb: f64,
    /// Smallest generalized eigenvalue of (B M_v^{-1} B^T, K_p) on the
    /// zero-mean pressure subspace.
    pub bp_global: f64,
    /// Minimum over all cells of the local analogue of `bp_global`.
    pub bp_element_min: f64,
}

/// Orthonormal basis of the complement of `v` (columns of the Householder
/// reflection mapping e_0 onto v/|v|, without the first column).
fn complement_basis(v: &[f64]) -> DMat {
    let m = v.len();
    assert!(m >= 2);
    let nrm = crate::util::norm2(v);
    let mut u: Vec<f64> = v.iter().map(|x| x / nrm).collect();
    u[0] -= 1.0; // u = v_hat - e_0
    let uu = crate::util::dot(&u, &u);
    let mut q = DMat::zeros(m, m - 1);
    for j in 1..m {
        for i in 0..m {
            let h = if i == j { 1.0 } else { 0.0 };
            q[(i, j - 1)] = h - 2.0 * u[i] * u[j] / uu;
        }
    }
    q
}

/// Eigenvalues of the symmetric pencil (G, M) with M SPD, ascending.
fn generalized_eigenvalues(g: &DMat, m: &DMat) -> Result<Vec<f64>> {
    let l = m.cholesky()?;
    let n = g.nrows;
    // C = L^{-1} G L^{-T}
    let mut c = DMat::zeros(n, n);
    for j in 0..n {
        let col = g.col(j);
        let y = l.solve_lower(&col);
        c.set_col(j, &y);
    }
    let ct = c.transpose();
    let mut c2 = DMat::zeros(n, n);
    for j in 0..n {
        let col = ct.col(j);
        let y = l.solve_lower(&col);
        c2.set_col(j, &y);
    }
    // Symmetrize roundoff.
    let t = c2.transpose();
    c2.add_scaled(1.0, &t);
    c2.scale(0.5);
    let (ev, _) = c2.sym_eig();
    Ok(ev)
}

fn active_velocity_indices(dofmap: &DofMap) -> Vec<usize> {
    let d = dofmap.dim;
    let mut idx = Vec::new();
    for node in 0..dofmap.n_scalar_v {
        if !dofmap.dirichlet[node] {
            for c in 0..d {
                idx.push(node * d + c);
            }
        }
    }
    idx
}

/// Compute the discrete LBB constant, the global Bercovier-Pironneau
/// eigenvalue and the per-element analogue for one level.
///
/// Matrices are assembled internally with unit parameters (mu = 1,
/// gamma*rho = 1, so the A block is the full H1 Gram matrix); the level is
/// subject to the assembly size guard.
pub fn check_infsup(mesh: &LevelMesh, dofmap: &DofMap) -> Result<InfSupReport> {
    let sys = assemble(
        mesh,
        alloc::sync::Arc::new(dofmap.clone()),
        1.0,
        1.0,
    )?;
    let act = active_velocity_indices(dofmap);
    let n_act = act.len();
    let m = dofmap.n_pressure();
    if n_act == 0 || m < 2 {
        return Err(Error::GuardExceeded { size: 0, limit: 2 });
    }

    // Dense active blocks.
    let a_full = sys.a.to_dense();
    let b_full = sys.b.to_dense();
    let mv_full = sys.m_v.to_dense();
    let mut a_act = DMat::zeros(n_act, n_act);
    let mut mv_act = DMat::zeros(n_act, n_act);
    let mut b_act = DMat::zeros(m, n_act);
    for (i, &gi) in act.iter().enumerate() {
        for (j, &gj) in act.iter().enumerate() {
            a_act[(i, j)] = a_full[(gi, gj)];
            mv_act[(i, j)] = mv_full[(gi, gj)];
        }
        for row in 0..m {
            b_act[(row, i)] = b_full[(row, gi)];
        }
    }

    // (i) LBB: smallest nonzero eigenvalue of (B A^{-1} B^T, M_p) where A
    // is the H1 Gram matrix; the constant is the square root.
    let la = a_act.cholesky()?;
    let mut g = DMat::zeros(m, m);
    {
        // Z = A^{-1} B^T column by column, G = B Z.
        for j in 0..m {
            let bt_col: Vec<f64> = (0..n_act).map(|i| b_act[(j, i)]).collect();
            let y = la.solve_lower(&bt_col);
            let z = la.solve_lower_t(&y);
            for i in 0..m {
                let mut acc = 0.0;
                for k in 0..n_act {
                    acc += b_act[(i, k)] * z[k];
                }
                g[(i, j)] += acc;
            }
        }
        let t = g.transpose();
        g.add_scaled(1.0, &t);
        g.scale(0.5);
    }
    let mp = sys.m_p.to_dense();
    let ev = generalized_eigenvalues(&g, &mp)?;
    let emax = ev.last().copied().unwrap_or(0.0);
    let lbb2 = ev
        .iter()
        .copied()
        .find(|&e| e > 1e-10 * emax.max(1e-300))
        .unwrap_or(0.0);
    let lbb = lbb2.max(0.0).sqrt();

    // (ii) Global Bercovier-Pironneau: (B M_v^{-1} B^T, K_p) deflated by
    // the constant pressure.
    let lm = mv_act.cholesky()?;
    let mut g2 = DMat::zeros(m, m);
    for j in 0..m {
        let bt_col: Vec<f64> = (0..n_act).map(|i| b_act[(j, i)]).collect();
        let y = lm.solve_lower(&bt_col);
        let z = lm.solve_lower_t(&y);
        for i in 0..m {
            let mut acc = 0.0;
            for k in 0..n_act {
                acc += b_act[(i, k)] * z[k];
            }
            g2[(i, j)] += acc;
        }
    }
    let t = g2.transpose();
    g2.add_scaled(1.0, &t);
    g2.scale(0.5);
    let kp = sys.k_p.to_dense();
    let ev2 = semidefinite_pencil_min(&g2, &kp)?;
    let bp_global = ev2;

    // (iii) Per-element analogue on unconstrained local spaces.
    let mut bp_element_min = f64::INFINITY;
    for cell in 0..mesh.n_cells() {
        let cm = cell_matrices(mesh, dofmap, cell)?;
        let np = cm.k_p.nrows;
        let nv = cm.m_v_scalar.nrows;
        let dim = dofmap.dim;
        // Full local velocity mass (block diagonal per component).
        let mut mv_loc = DMat::zeros(nv * dim, nv * dim);
        for i in 0..nv {
            for j in 0..nv {
                for c in 0..dim {
                    mv_loc[(i * dim + c, j * dim + c)] = cm.m_v_scalar[(i, j)];
                }
            }
        }
        let lm = mv_loc.cholesky()?;
        let mut g_loc = DMat::zeros(np, np);
        for j in 0..np {
            let bt_col: Vec<f64> = (0..nv * dim).map(|i| cm.b[(j, i)]).collect();
            let y = lm.solve_lower(&bt_col);
            let z = lm.solve_lower_t(&y);
            for i in 0..np {
                let mut acc = 0.0;
                for k in 0..nv * dim {
                    acc += cm.b[(i, k)] * z[k];
                }
                g_loc[(i, j)] += acc;
            }
        }
        let tl = g_loc.transpose();
        g_loc.add_scaled(1.0, &tl);
        g_loc.scale(0.5);
        let lmin = semidefinite_pencil_min(&g_loc, &cm.k_p)?;
        bp_element_min = bp_element_min.min(lmin);
    }

    Ok(InfSupReport {
        lbb,
        bp_global,
        bp_element_min,
    })
}

/// Q^T G Q for a tall orthonormal Q.
fn reduce(g: &DMat, q: &DMat) -> DMat {
    q.transpose().matmul(&g.matmul(q))
}

/// Jacobi-preconditioned conjugate gradients for a sparse SPD system (used
/// for mass-matrix inverses in the larger inf-sup checks; the diagonally
/// preconditioned mass matrix is uniformly well conditioned).
fn cg_solve(a: &crate::linalg::CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Vec<f64> {
    let n = b.len();
    let diag = a.diag();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let rhs_norm = crate::util::norm2(b);
    if rhs_norm == 0.0 {
        return x;
    }
    let mut rz = crate::util::dot(&r, &z);
    for _ in 0..max_iter {
        a.matvec(&p, &mut ap);
        let alpha = rz / crate::util::dot(&p, &ap);
        crate::util::axpy(alpha, &p, &mut x);
        crate::util::axpy(-alpha, &ap, &mut r);
        if crate::util::norm2(&r) <= tol * rhs_norm {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = crate::util::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

/// Global Bercovier-Pironneau eigenvalue with the velocity mass inverse
/// applied by conjugate gradients (handles levels too large for dense
/// Cholesky of M_v; the pressure-space eigenproblem stays dense).
pub fn check_bp_global_sparse(mesh: &LevelMesh, dofmap: &DofMap) -> Result<f64> {
    let sys = assemble(mesh, alloc::sync::Arc::new(dofmap.clone()), 1.0, 1.0)?;
    let act = active_velocity_indices(dofmap);
    let n_act = act.len();
    let m = dofmap.n_pressure();
    // Index map global -> active.
    let mut to_act = vec![usize::MAX; dofmap.n_velocity()];
    for (i, &g) in act.iter().enumerate() {
        to_act[g] = i;
    }
    // Active sparse M_v and dense active B rows.
    let mut trips = Vec::new();
    for i in 0..dofmap.n_velocity() {
        if to_act[i] == usize::MAX {
            continue;
        }
        for (j, v) in sys.m_v.row(i) {
            if to_act[j] != usize::MAX {
                trips.push((to_act[i], to_act[j], v));
            }
        }
    }
    let mv_act = crate::linalg::CsrMatrix::from_triplets(n_act, n_act, &trips);
    let mut g2 = DMat::zeros(m, m);
    let mut bt_col = vec![0.0; n_act];
    for j in 0..m {
        bt_col.fill(0.0);
        for (col, v) in sys.b.row(j) {
            if to_act[col] != usize::MAX {
                bt_col[to_act[col]] = v;
            }
        }
        let z = cg_solve(&mv_act, &bt_col, 1e-13, 400);
        for i in 0..m {
            let mut acc = 0.0;
            for (col, v) in sys.b.row(i) {
                if to_act[col] != usize::MAX {
                    acc += v * z[to_act[col]];
                }
            }
            g2[(i, j)] += acc;
        }
    }
    let t = g2.transpose();
    g2.add_scaled(1.0, &t);
    g2.scale(0.5);
    let kp = sys.k_p.to_dense();
    semidefinite_pencil_min(&g2, &kp)
}

/// Smallest finite generalized eigenvalue of the pencil (G, K) where K is
/// positive semidefinite with kernel exactly span{1}: the infimum of
/// p'Gp / p'Kp over p outside the kernel. The kernel direction is removed
/// from K by restriction and from G by the Schur complement (the numerator
/// is minimized over the constant shift, which matters when G 1 != 0).
fn semidefinite_pencil_min(g: &DMat, k: &DMat) -> Result<f64> {
    let m = g.nrows;
    let ones = vec![1.0; m];
    let q = complement_basis(&ones);
    let mut g1 = vec![0.0; m];
    g.matvec(&ones, &mut g1);
    let s = crate::util::dot(&ones, &g1);
    let mut g_eff = g.clone();
    if s > 1e-12 * g.max_abs().max(1e-300) * m as f64 {
        for i in 0..m {
            for j in 0..m {
                g_eff[(i, j)] -= g1[i] * g1[j] / s;
            }
        }
    }
    let gr = reduce(&g_eff, &q);
    let kr = reduce(k, &q);
    let ev = generalized_eigenvalues(&gr, &kr)?;
    Ok(ev.first().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{build_dofmap, mark_dirichlet};
    use crate::mesh::{channel_ids, make_channel_with_cylinder, make_unit_hypercube};

    #[test]
    fn cavity_constants_positive_and_stable() {
        let meshes = make_unit_hypercube(2, 3);
        let mut reports = Vec::new();
        for level in [2usize, 3] {
            let mesh = &meshes.levels[level];
            let mut dm = build_dofmap(mesh, 2).unwrap();
            mark_dirichlet(&mut dm, mesh, &[0, 1, 2, 3]);
            let rep = check_infsup(mesh, &dm).unwrap();
            assert!(rep.lbb > 0.0, "{rep:?}");
            assert!(rep.bp_global > 0.0, "{rep:?}");
            assert!(rep.bp_element_min > 0.0, "{rep:?}");
            reports.push(rep);
        }
        // Mesh independence within 20% across the level pair.
        let r0 = &reports[0];
        let r1 = &reports[1];
        assert!((r1.lbb / r0.lbb - 1.0).abs() <= 0.2, "{} {}", r0.lbb, r1.lbb);
        assert!(
            (r1.bp_global / r0.bp_global - 1.0).abs() <= 0.2,
            "{} {}",
            r0.bp_global,
            r1.bp_global
        );
    }

    #[test]
    fn channel_element_constant_positive_everywhere() {
        let h = make_channel_with_cylinder();
        let mesh = h.finest();
        let mut dm = build_dofmap(mesh, 2).unwrap();
        mark_dirichlet(
            &mut dm,
            mesh,
            &[channel_ids::WALL, channel_ids::CYLINDER, channel_ids::INFLOW],
        );
        let rep = check_infsup(mesh, &dm).unwrap();
        assert!(rep.lbb > 0.0);
        assert!(rep.bp_global > 0.0);
        assert!(rep.bp_element_min > 0.0);
    }

    #[test]
    fn complement_basis_orthonormal() {
        let v = vec![1.0; 5];
        let q = complement_basis(&v);
        let qtq = q.transpose().matmul(&q);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - expect).abs() < 1e-13);
            }
        }
        // Columns orthogonal to v.
        for j in 0..4 {
            let col = q.col(j);
            assert!(crate::util::dot(&col, &v).abs() < 1e-13);
        }
    }
}
