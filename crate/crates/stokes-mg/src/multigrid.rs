//! The monolithic multigrid cycle: level hierarchy, canonical-injection
//! transfers, coarse direct solve, V/W cycles and the outer solve driver.
//!
//! Prolongation is element-local tensor-product interpolation from parent
//! cells to their children (the matrix representation of the canonical
//! injection between nested spaces); restriction is its exact transpose,
//! realized by the same 1d embedding tables with multiplicity weights on
//! the fine side. The coarse system is assembled once and factorized with
//! dense LU (rank-1 regularized in the constant-pressure direction when the
//! pressure mean is constrained).

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::fespace::{
    build_dofmap, mark_dirichlet, pressure_mean_project, BlockVector, DofMap, Lagrange1d,
};
use crate::linalg::LuFactors;
use crate::mesh::MeshHierarchy;
use crate::mfoperator::{apply2, apply3, ApplyMode, MatRef, StokesOperator};
use crate::smoother::{setup_uzawa, DiagChoice, UzawaSmoother};
use crate::verify::assemble;

/// Multigrid recursion index: V (gamma = 1) or W (gamma = 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleType {
    V,
    W,
}

impl CycleType {
    pub fn gamma(&self) -> usize {
        match self {
            CycleType::V => 1,
            CycleType::W => 2,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CycleType::V => "V",
            CycleType::W => "W",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "V" | "v" => Some(CycleType::V),
            "W" | "w" => Some(CycleType::W),
            _ => None,
        }
    }
}

/// Termination state of the outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Diverged,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max-iter",
            SolveStatus::Diverged => "diverged",
        }
    }
}

/// Result of the outer multigrid iteration.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: BlockVector,
    /// Euclidean residual norms r^j = ||b - K x^j||, starting with r^0.
    pub residuals: Vec<f64>,
    pub status: SolveStatus,
}

/// Configuration of a hierarchy build.
#[derive(Debug, Clone)]
pub struct HierarchyParams {
    /// Velocity degree k (pressure k-1).
    pub degree: usize,
    pub mu: f64,
    pub gamma_rho: f64,
    /// Dirichlet boundary ids in priority order (later wins at corners).
    pub dirichlet_ids: Vec<u32>,
    pub pressure_mean: bool,
    pub k_a: usize,
    pub k_s: usize,
    /// Pre- and post-smoothing steps (equal by construction).
    pub m_smooth: usize,
    pub cycle: CycleType,
    pub diag_choice: DiagChoice,
}

/// 1d embedding tables between a parent cell and one child offset:
/// fwd[off][i_child * n1 + j_coarse] = l_j((x_i + off) / 2).
struct Embedding {
    n1: usize,
    fwd: [Vec<f64>; 2],
    bwd: [Vec<f64>; 2],
}

impl Embedding {
    fn build(degree: usize) -> Self {
        let basis = Lagrange1d::new(degree);
        let n1 = degree + 1;
        let mut fwd = [vec![0.0; n1 * n1], vec![0.0; n1 * n1]];
        let mut bwd = [vec![0.0; n1 * n1], vec![0.0; n1 * n1]];
        for off in 0..2 {
            for i in 0..n1 {
                let x = 0.5 * (basis.nodes[i] + off as f64);
                for j in 0..n1 {
                    let v = basis.eval(j, x);
                    fwd[off][i * n1 + j] = v;
                    bwd[off][j * n1 + i] = v;
                }
            }
        }
        Embedding { n1, fwd, bwd }
    }

    fn fwd_ref(&self, off: usize) -> MatRef<'_> {
        MatRef {
            rows: self.n1,
            cols: self.n1,
            data: &self.fwd[off],
        }
    }

    fn bwd_ref(&self, off: usize) -> MatRef<'_> {
        MatRef {
            rows: self.n1,
            cols: self.n1,
            data: &self.bwd[off],
        }
    }
}

/// Transfer data between one level pair.
struct Transfer {
    embed_v: Embedding,
    embed_p: Embedding,
    /// 1/multiplicity per fine scalar node (velocity / pressure).
    weights_v: Vec<f64>,
    weights_p: Vec<f64>,
}

impl Transfer {
    fn build(coarse: &DofMap, fine: &DofMap) -> Self {
        let dim = coarse.dim;
        let children = 1usize << dim;
        let mut mult_v = vec![0usize; fine.n_scalar_v];
        let mut mult_p = vec![0usize; fine.n_scalar_p];
        for c in 0..coarse.n_cells {
            for j in 0..children {
                let child_cell = (c << dim) + j;
                for &dof in fine.cell_dofs_v(child_cell) {
                    mult_v[dof] += 1;
                }
                for &dof in fine.cell_dofs_p(child_cell) {
                    mult_p[dof] += 1;
                }
            }
        }
        Transfer {
            embed_v: Embedding::build(coarse.degree),
            embed_p: Embedding::build(coarse.degree - 1),
            weights_v: mult_v.iter().map(|&m| 1.0 / m as f64).collect(),
            weights_p: mult_p.iter().map(|&m| 1.0 / m as f64).collect(),
        }
    }

    /// Tensor-apply of the embedding (or its transpose) for one child.
    #[allow(clippy::too_many_arguments)]
    fn child_interp(
        &self,
        dim: usize,
        embed: &Embedding,
        child: usize,
        xl: &[f64],
        tmp: &mut [f64],
        tmp2: &mut [f64],
        out: &mut [f64],
        transpose: bool,
    ) {
        let pick = |d: usize| -> MatRef<'_> {
            let off = (child >> d) & 1;
            if transpose {
                embed.bwd_ref(off)
            } else {
                embed.fwd_ref(off)
            }
        };
        match dim {
            2 => apply2(pick(0), pick(1), xl, tmp, out),
            3 => apply3(pick(0), pick(1), pick(2), xl, tmp, tmp2, out),
            _ => unreachable!(),
        }
    }
}

/// Multigrid hierarchy over nested levels.
pub struct Hierarchy {
    pub dofmaps: Vec<Arc<DofMap>>,
    pub operators: Vec<Arc<StokesOperator>>,
    smoothers: Vec<Option<UzawaSmoother>>,
    transfers: Vec<Transfer>,
    coarse_lu: LuFactors,
    pub cycle: CycleType,
    pub m_smooth: usize,
    pub pressure_mean: bool,
}

impl Hierarchy {
    /// Build dof maps, operators, smoothers, transfers and the coarse
    /// factorization for all levels of the mesh hierarchy.
    pub fn build(meshes: &MeshHierarchy, params: &HierarchyParams) -> Result<Self> {
        let n_levels = meshes.n_levels();
        assert!(n_levels >= 1);
        let mut dofmaps = Vec::with_capacity(n_levels);
        let mut operators = Vec::with_capacity(n_levels);
        for mesh in &meshes.levels {
            let mut dm = build_dofmap(mesh, params.degree)?;
            mark_dirichlet(&mut dm, mesh, &params.dirichlet_ids);
            dm.pressure_mean_constrained = params.pressure_mean;
            let dm = Arc::new(dm);
            let op = Arc::new(StokesOperator::new(
                mesh,
                dm.clone(),
                params.mu,
                params.gamma_rho,
            )?);
            dofmaps.push(dm);
            operators.push(op);
        }
        let mut smoothers = Vec::with_capacity(n_levels);
        smoothers.push(None); // level 0 is solved directly
        for l in 1..n_levels {
            let assembled = if params.diag_choice == DiagChoice::AssembledD {
                Some(assemble(
                    &meshes.levels[l],
                    dofmaps[l].clone(),
                    params.mu,
                    params.gamma_rho,
                )?)
            } else {
                None
            };
            smoothers.push(Some(setup_uzawa(
                operators[l].clone(),
                params.k_a,
                params.k_s,
                params.diag_choice,
                assembled.as_ref(),
            )?));
        }
        let mut transfers = Vec::with_capacity(n_levels.saturating_sub(1));
        for l in 1..n_levels {
            transfers.push(Transfer::build(&dofmaps[l - 1], &dofmaps[l]));
        }
        // Coarse factorization: assembled level-0 matrix with identity
        // rows/columns at constrained dofs, rank-1 regularized in the
        // constant-pressure direction when the mean is constrained.
        let sys0 = assemble(
            &meshes.levels[0],
            dofmaps[0].clone(),
            params.mu,
            params.gamma_rho,
        )?;
        let mut k0 = sys0.dense_k(ApplyMode::Smoothing);
        let n0 = dofmaps[0].n_velocity();
        let m0 = dofmaps[0].n_pressure();
        if params.pressure_mean {
            let mut scale: f64 = 0.0;
            for i in 0..n0 + m0 {
                scale = scale.max(k0[(i, i)].abs());
            }
            let gamma_reg = scale.max(1.0) / m0 as f64;
            for i in 0..m0 {
                for j in 0..m0 {
                    k0[(n0 + i, n0 + j)] += gamma_reg;
                }
            }
        }
        let coarse_lu = k0.lu()?;
        Ok(Hierarchy {
            dofmaps,
            operators,
            smoothers,
            transfers,
            coarse_lu,
            cycle: params.cycle,
            m_smooth: params.m_smooth,
            pressure_mean: params.pressure_mean,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.dofmaps.len()
    }

    pub fn finest(&self) -> usize {
        self.n_levels() - 1
    }

    pub fn smoother(&self, level: usize) -> Option<&UzawaSmoother> {
        self.smoothers[level].as_ref()
    }

    fn project_if_constrained(&self, level: usize, p: &mut [f64]) {
        if self.pressure_mean {
            pressure_mean_project(&self.dofmaps[level], p);
        }
    }

    /// Canonical-injection prolongation from level-1 to level (element-local
    /// tensor-product interpolation for both fields); constrained dofs are
    /// zeroed on both sides so restriction is the exact transpose.
    pub fn prolongate(&self, level: usize, coarse: &BlockVector) -> BlockVector {
        assert!(level >= 1);
        let t = &self.transfers[level - 1];
        let dm_c = &self.dofmaps[level - 1];
        let dm_f = &self.dofmaps[level];
        let dim = dm_c.dim;
        let children = 1usize << dim;
        let mut cin = coarse.clone();
        dm_c.zero_constrained(&mut cin.u);
        let mut out = BlockVector::zeros(dm_f);
        let nv = dm_c.n_local_v();
        let np = dm_c.n_local_p();
        let cap = nv.max(np);
        let mut xl = vec![0.0; cap];
        let mut yl = vec![0.0; cap];
        let mut tmp = vec![0.0; cap];
        let mut tmp2 = vec![0.0; cap];
        for c in 0..dm_c.n_cells {
            let dofs_cv = dm_c.cell_dofs_v(c);
            let dofs_cp = dm_c.cell_dofs_p(c);
            for child in 0..children {
                let child_cell = (c << dim) + child;
                let dofs_fv = dm_f.cell_dofs_v(child_cell);
                for comp in 0..dim {
                    for (i, &dof) in dofs_cv.iter().enumerate() {
                        xl[i] = cin.u[dof * dim + comp];
                    }
                    t.child_interp(
                        dim,
                        &t.embed_v,
                        child,
                        &xl[..nv],
                        &mut tmp,
                        &mut tmp2,
                        &mut yl,
                        false,
                    );
                    for (i, &dof) in dofs_fv.iter().enumerate() {
                        out.u[dof * dim + comp] += t.weights_v[dof] * yl[i];
                    }
                }
                let dofs_fp = dm_f.cell_dofs_p(child_cell);
                for (i, &dof) in dofs_cp.iter().enumerate() {
                    xl[i] = cin.p[dof];
                }
                t.child_interp(
                    dim,
                    &t.embed_p,
                    child,
                    &xl[..np],
                    &mut tmp,
                    &mut tmp2,
                    &mut yl,
                    false,
                );
                for (i, &dof) in dofs_fp.iter().enumerate() {
                    out.p[dof] += t.weights_p[dof] * yl[i];
                }
            }
        }
        dm_f.zero_constrained(&mut out.u);
        out
    }

    /// Exact transpose of [`Hierarchy::prolongate`]: scatter of the same 1d
    /// embedding tables with the same fine-side weights.
    pub fn restrict(&self, level: usize, fine: &BlockVector) -> BlockVector {
        assert!(level >= 1);
        let t = &self.transfers[level - 1];
        let dm_c = &self.dofmaps[level - 1];
        let dm_f = &self.dofmaps[level];
        let dim = dm_c.dim;
        let children = 1usize << dim;
        let mut fin = fine.clone();
        dm_f.zero_constrained(&mut fin.u);
        let mut out = BlockVector::zeros(dm_c);
        let nv = dm_c.n_local_v();
        let np = dm_c.n_local_p();
        let cap = nv.max(np);
        let mut xl = vec![0.0; cap];
        let mut yl = vec![0.0; cap];
        let mut tmp = vec![0.0; cap];
        let mut tmp2 = vec![0.0; cap];
        for c in 0..dm_c.n_cells {
            let dofs_cv = dm_c.cell_dofs_v(c);
            let dofs_cp = dm_c.cell_dofs_p(c);
            for child in 0..children {
                let child_cell = (c << dim) + child;
                let dofs_fv = dm_f.cell_dofs_v(child_cell);
                for comp in 0..dim {
                    for (i, &dof) in dofs_fv.iter().enumerate() {
                        xl[i] = t.weights_v[dof] * fin.u[dof * dim + comp];
                    }
                    t.child_interp(
                        dim,
                        &t.embed_v,
                        child,
                        &xl[..nv],
                        &mut tmp,
                        &mut tmp2,
                        &mut yl,
                        true,
                    );
                    for (i, &dof) in dofs_cv.iter().enumerate() {
                        out.u[dof * dim + comp] += yl[i];
                    }
                }
                let dofs_fp = dm_f.cell_dofs_p(child_cell);
                for (i, &dof) in dofs_fp.iter().enumerate() {
                    xl[i] = t.weights_p[dof] * fin.p[dof];
                }
                t.child_interp(
                    dim,
                    &t.embed_p,
                    child,
                    &xl[..np],
                    &mut tmp,
                    &mut tmp2,
                    &mut yl,
                    true,
                );
                for (i, &dof) in dofs_cp.iter().enumerate() {
                    out.p[dof] += yl[i];
                }
            }
        }
        dm_c.zero_constrained(&mut out.u);
        out
    }

    /// Direct solve of the coarse system (rank-1 regularized and projected
    /// to zero pressure mean when the mean is constrained).
    pub fn coarse_solve(&self, r: &BlockVector) -> BlockVector {
        let dm = &self.dofmaps[0];
        let mut rhs = r.clone();
        dm.zero_constrained(&mut rhs.u);
        self.project_if_constrained(0, &mut rhs.p);
        let x = self.coarse_lu.solve(&rhs.to_flat());
        let mut out = BlockVector::from_flat(dm, &x);
        self.project_if_constrained(0, &mut out.p);
        out
    }

    /// One multigrid cycle on `level`: m pre-smooths, residual, restrict,
    /// gamma recursive calls, prolongate, correct, m post-smooths; level 0
    /// is the direct coarse solve.
    pub fn mg_cycle(&self, level: usize, x: &mut BlockVector, b: &BlockVector) {
        self.mg_cycle_counted(level, x, b, &mut Vec::new());
    }

    /// Like [`Hierarchy::mg_cycle`] but counts the visits per level
    /// (`visits` may be empty to skip counting).
    pub fn mg_cycle_counted(
        &self,
        level: usize,
        x: &mut BlockVector,
        b: &BlockVector,
        visits: &mut Vec<usize>,
    ) {
        if !visits.is_empty() {
            visits[level] += 1;
        }
        if level == 0 {
            *x = self.coarse_solve(b);
            return;
        }
        let smoother = self.smoothers[level].as_ref().expect("smoother on level > 0");
        for _ in 0..self.m_smooth {
            smoother.step(x, b);
            self.project_if_constrained(level, &mut x.p);
        }
        // Residual and restriction.
        let op = &self.operators[level];
        let kx = op.apply_k(x, ApplyMode::Residual).expect("sized");
        let mut r = b.clone();
        r.axpy(-1.0, &kx);
        self.dofmaps[level].zero_constrained(&mut r.u);
        self.project_if_constrained(level, &mut r.p);
        let mut rc = self.restrict(level, &r);
        self.project_if_constrained(level - 1, &mut rc.p);
        // Recursion.
        let mut w = BlockVector::zeros(&self.dofmaps[level - 1]);
        for _ in 0..self.cycle.gamma() {
            self.mg_cycle_counted(level - 1, &mut w, &rc, visits);
        }
        // Prolongate and correct.
        let corr = self.prolongate(level, &w);
        x.axpy(1.0, &corr);
        self.project_if_constrained(level, &mut x.p);
        for _ in 0..self.m_smooth {
            smoother.step(x, b);
            self.project_if_constrained(level, &mut x.p);
        }
    }

    /// Outer iteration from x^0 = 0: repeat cycles until the Euclidean
    /// residual drops by `tol` relative to r^0, at most `max_iter` cycles.
    /// Divergence (three consecutive 10x residual growths or a non-finite
    /// residual) is reported as a status, not an error.
    pub fn solve(&self, b: &BlockVector, tol: f64, max_iter: usize) -> SolveResult {
        self.solve_observed(b, tol, max_iter, &mut |_, _| {})
    }

    /// [`Hierarchy::solve`] with a per-iteration observer `(iter, residual)`
    /// called after each cycle (used by the bench driver for timing).
    pub fn solve_observed(
        &self,
        b: &BlockVector,
        tol: f64,
        max_iter: usize,
        observer: &mut dyn FnMut(usize, f64),
    ) -> SolveResult {
        let level = self.finest();
        let op = &self.operators[level];
        let mut x = BlockVector::zeros(&self.dofmaps[level]);
        let residual_norm = |x: &BlockVector| -> f64 {
            let kx = op.apply_k(x, ApplyMode::Residual).expect("sized");
            let mut r = b.clone();
            r.axpy(-1.0, &kx);
            r.norm()
        };
        let r0 = residual_norm(&x);
        let mut residuals = vec![r0];
        let mut growth_streak = 0usize;
        let mut status = SolveStatus::MaxIter;
        for it in 1..=max_iter {
            self.mg_cycle(level, &mut x, b);
            self.project_if_constrained(level, &mut x.p);
            let r = residual_norm(&x);
            observer(it, r);
            let prev = *residuals.last().unwrap();
            residuals.push(r);
            if !r.is_finite() {
                status = SolveStatus::Diverged;
                break;
            }
            if r > 10.0 * prev {
                growth_streak += 1;
                if growth_streak >= 3 {
                    status = SolveStatus::Diverged;
                    break;
                }
            } else {
                growth_streak = 0;
            }
            if r <= tol * r0 {
                status = SolveStatus::Converged;
                break;
            }
        }
        SolveResult {
            x,
            residuals,
            status,
        }
    }
}
