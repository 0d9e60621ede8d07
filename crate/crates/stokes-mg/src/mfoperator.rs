//! Matrix-free application of the Stokes saddle-point operator
//! K = [[A, B^T], [B, 0]] and of its blocks, together with matrix-free
//! extraction of the diagonals needed by the smoother.
//!
//! The result K x is accumulated cell by cell as sum_tau P_tau K_tau P_tau^T x
//! through quadrature-point loops; no element or global matrices are stored.
//! All tensor-product contractions run one coordinate direction at a time
//! (sum factorization) with geometric factors stored per quadrature point.
//!
//! Constraint convention (shared policy): Dirichlet-constrained velocity
//! dofs act as zero rows/columns in residual contexts and as identity rows
//! in smoothing contexts; boundary values are imposed once on the finest
//! level by the solve driver, coarse levels are always homogeneous.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fespace::{BlockVector, DofMap, Lagrange1d, ShapeTable};
use crate::mesh::LevelMesh;
use crate::quadrature::gauss_legendre;

/// How constrained dofs are treated by an operator application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApplyMode {
    /// Plain bilinear form, no constraint handling.
    Raw,
    /// Zero constrained input entries and output rows (P0 K P0).
    Residual,
    /// Like `Residual` but constrained dofs act as identity rows
    /// (P0 K P0 + (I - P0)); used inside the smoother.
    Smoothing,
}

/// Row-major matrix view for the 1d contractions.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a> {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) data: &'a [f64],
}

/// Contract the innermost (fastest) index: x is [n_slices][m.cols],
/// y becomes [n_slices][m.rows].
pub(crate) fn contract_inner(m: MatRef, n_slices: usize, x: &[f64], y: &mut [f64]) {
    for s in 0..n_slices {
        let xs = &x[s * m.cols..(s + 1) * m.cols];
        let ys = &mut y[s * m.rows..(s + 1) * m.rows];
        for r in 0..m.rows {
            let row = &m.data[r * m.cols..(r + 1) * m.cols];
            let mut acc = 0.0;
            for c in 0..m.cols {
                acc += row[c] * xs[c];
            }
            ys[r] = acc;
        }
    }
}

/// Contract the outermost (slowest) index: x is [m.cols][inner],
/// y becomes [m.rows][inner].
pub(crate) fn contract_outer(m: MatRef, inner: usize, x: &[f64], y: &mut [f64]) {
    y[..m.rows * inner].fill(0.0);
    for r in 0..m.rows {
        let yrow = &mut y[r * inner..(r + 1) * inner];
        for c in 0..m.cols {
            let b = m.data[r * m.cols + c];
            if b == 0.0 {
                continue;
            }
            let xrow = &x[c * inner..(c + 1) * inner];
            for i in 0..inner {
                yrow[i] += b * xrow[i];
            }
        }
    }
}

/// y = (b (x) a) x for a 2d tensor-product operator.
pub(crate) fn apply2(a: MatRef, b: MatRef, x: &[f64], tmp: &mut [f64], y: &mut [f64]) {
    contract_inner(a, b.cols, x, tmp);
    contract_outer(b, a.rows, tmp, y);
}

/// y = (c (x) b (x) a) x for a 3d tensor-product operator.
pub(crate) fn apply3(
    a: MatRef,
    b: MatRef,
    c: MatRef,
    x: &[f64],
    t1: &mut [f64],
    t2: &mut [f64],
    y: &mut [f64],
) {
    contract_inner(a, b.cols * c.cols, x, t1);
    for s in 0..c.cols {
        let xs = &t1[s * b.cols * a.rows..(s + 1) * b.cols * a.rows];
        let ys = &mut t2[s * b.rows * a.rows..(s + 1) * b.rows * a.rows];
        contract_outer(b, a.rows, xs, ys);
    }
    contract_outer(c, b.rows * a.rows, t2, y);
}

/// Precomputed 1d tables of one field at the shared Gauss points.
#[derive(Debug, Clone)]
struct Tables {
    n1: usize,
    nq1: usize,
    /// [q][i] value table.
    val: Vec<f64>,
    der: Vec<f64>,
    /// [i][q] transposes for the integration (test-function) side.
    val_t: Vec<f64>,
    der_t: Vec<f64>,
}

impl Tables {
    fn new(degree: usize, quad_points: &[f64]) -> Self {
        let basis = Lagrange1d::new(degree);
        let st = ShapeTable::tabulate(&basis, quad_points);
        let (n1, nq1) = (st.n_fns, st.n_pts);
        let mut val_t = vec![0.0; n1 * nq1];
        let mut der_t = vec![0.0; n1 * nq1];
        for q in 0..nq1 {
            for i in 0..n1 {
                val_t[i * nq1 + q] = st.val[q * n1 + i];
                der_t[i * nq1 + q] = st.der[q * n1 + i];
            }
        }
        Tables {
            n1,
            nq1,
            val: st.val,
            der: st.der,
            val_t,
            der_t,
        }
    }

    fn v(&self) -> MatRef<'_> {
        MatRef {
            rows: self.nq1,
            cols: self.n1,
            data: &self.val,
        }
    }

    fn d(&self) -> MatRef<'_> {
        MatRef {
            rows: self.nq1,
            cols: self.n1,
            data: &self.der,
        }
    }

    fn vt(&self) -> MatRef<'_> {
        MatRef {
            rows: self.n1,
            cols: self.nq1,
            data: &self.val_t,
        }
    }

    fn dt(&self) -> MatRef<'_> {
        MatRef {
            rows: self.n1,
            cols: self.nq1,
            data: &self.der_t,
        }
    }
}

/// Per-cell, per-quadrature-point geometric factors.
#[derive(Debug, Clone)]
pub struct GeometryFactors {
    /// Number of quadrature points per cell.
    pub nq: usize,
    /// Row-major d x d inverse-transpose Jacobian per (cell, point).
    inv_jt: Vec<f64>,
    /// det(J) times the tensor quadrature weight per (cell, point).
    jxw: Vec<f64>,
    /// Physical coordinates of the quadrature points.
    points: Vec<[f64; 3]>,
}

impl GeometryFactors {
    fn build(
        mesh: &LevelMesh,
        nq1: usize,
        quad_points: &[f64],
        quad_weights: &[f64],
    ) -> Result<Self> {
        let dim = mesh.dim;
        let nq = nq1.pow(dim as u32);
        let mut ref_pts = Vec::with_capacity(nq);
        let mut wts = Vec::with_capacity(nq);
        for q in 0..nq {
            let mut idx = q;
            let mut xi = [0.0f64; 3];
            let mut w = 1.0;
            for item in xi.iter_mut().take(dim) {
                let q1 = idx % nq1;
                idx /= nq1;
                *item = quad_points[q1];
                w *= quad_weights[q1];
            }
            ref_pts.push(xi);
            wts.push(w);
        }
        let n_cells = mesh.n_cells();
        let mut inv_jt = vec![0.0; n_cells * nq * dim * dim];
        let mut jxw = vec![0.0; n_cells * nq];
        let mut points = vec![[0.0f64; 3]; n_cells * nq];
        for c in 0..n_cells {
            let mapped = mesh.cell_mapping(c, &ref_pts)?;
            for (q, mp) in mapped.iter().enumerate() {
                let base = (c * nq + q) * dim * dim;
                for i in 0..dim {
                    for j in 0..dim {
                        inv_jt[base + i * dim + j] = mp.inv_transpose[i * 3 + j];
                    }
                }
                jxw[c * nq + q] = mp.det * wts[q];
                points[c * nq + q] = mp.point;
            }
        }
        Ok(GeometryFactors {
            nq,
            inv_jt,
            jxw,
            points,
        })
    }

    #[inline]
    fn inv_jt(&self, dim: usize, cell: usize, q: usize) -> &[f64] {
        let base = (cell * self.nq + q) * dim * dim;
        &self.inv_jt[base..base + dim * dim]
    }

    #[inline]
    fn jxw(&self, cell: usize, q: usize) -> f64 {
        self.jxw[cell * self.nq + q]
    }

    #[inline]
    pub fn point(&self, cell: usize, q: usize) -> [f64; 3] {
        self.points[cell * self.nq + q]
    }
}

/// Scratch buffers reused across cells inside one operator application.
struct Scratch {
    grads: [Vec<f64>; 3],
    flux: [Vec<f64>; 3],
    vals: Vec<f64>,
    t1: Vec<f64>,
    t2: Vec<f64>,
    acc: Vec<f64>,
}

impl Scratch {
    fn new(cap: usize) -> Self {
        Scratch {
            grads: [vec![0.0; cap], vec![0.0; cap], vec![0.0; cap]],
            flux: [vec![0.0; cap], vec![0.0; cap], vec![0.0; cap]],
            vals: vec![0.0; cap],
            t1: vec![0.0; cap],
            t2: vec![0.0; cap],
            acc: vec![0.0; cap],
        }
    }
}

/// Matrix-free action of the saddle-point operator and its blocks,
/// parametrized by the viscosity and the reaction coefficient gamma*rho
/// (zero for stationary Stokes).
pub struct StokesOperator {
    pub dofmap: Arc<DofMap>,
    pub mu: f64,
    pub gamma_rho: f64,
    geo: GeometryFactors,
    tab_v: Tables,
    tab_p: Tables,
    dim: usize,
}

impl StokesOperator {
    /// Precompute tables and geometric factors for one level.
    ///
    /// All blocks share one (k+1)^d Gauss rule so that B^T is the exact
    /// adjoint of B.
    pub fn new(mesh: &LevelMesh, dofmap: Arc<DofMap>, mu: f64, gamma_rho: f64) -> Result<Self> {
        let k = dofmap.degree;
        let quad = gauss_legendre(k + 1);
        let tab_v = Tables::new(k, &quad.points);
        let tab_p = Tables::new(k - 1, &quad.points);
        let geo = GeometryFactors::build(mesh, quad.len(), &quad.points, &quad.weights)?;
        Ok(StokesOperator {
            dim: dofmap.dim,
            dofmap,
            mu,
            gamma_rho,
            geo,
            tab_v,
            tab_p,
        })
    }

    pub fn geometry(&self) -> &GeometryFactors {
        &self.geo
    }

    fn scratch(&self) -> Scratch {
        let n1 = self.tab_v.n1.max(self.tab_v.nq1);
        Scratch::new(n1.pow(self.dim as u32))
    }

    fn n_cells(&self) -> usize {
        self.dofmap.n_cells
    }

    /// Reference-gradient components of a scalar local field at all
    /// quadrature points (into `s.grads`).
    fn local_gradients(&self, tab: &Tables, xl: &[f64], s: &mut Scratch) {
        match self.dim {
            2 => {
                apply2(tab.d(), tab.v(), xl, &mut s.t1, &mut s.grads[0]);
                apply2(tab.v(), tab.d(), xl, &mut s.t1, &mut s.grads[1]);
            }
            3 => {
                apply3(tab.d(), tab.v(), tab.v(), xl, &mut s.t1, &mut s.t2, &mut s.grads[0]);
                apply3(tab.v(), tab.d(), tab.v(), xl, &mut s.t1, &mut s.t2, &mut s.grads[1]);
                apply3(tab.v(), tab.v(), tab.d(), xl, &mut s.t1, &mut s.t2, &mut s.grads[2]);
            }
            _ => unreachable!(),
        }
    }

    /// Values of a scalar local field at all quadrature points (into `s.vals`).
    fn local_values(&self, tab: &Tables, xl: &[f64], s: &mut Scratch) {
        match self.dim {
            2 => apply2(tab.v(), tab.v(), xl, &mut s.t1, &mut s.vals),
            3 => apply3(tab.v(), tab.v(), tab.v(), xl, &mut s.t1, &mut s.t2, &mut s.vals),
            _ => unreachable!(),
        }
    }

    /// yl += sum_j D_j^T flux_j (integration against test gradients).
    fn integrate_gradients(&self, tab: &Tables, s: &mut Scratch, yl: &mut [f64]) {
        let nloc = tab.n1.pow(self.dim as u32);
        for j in 0..self.dim {
            match self.dim {
                2 => {
                    let (a, b) = if j == 0 {
                        (tab.dt(), tab.vt())
                    } else {
                        (tab.vt(), tab.dt())
                    };
                    apply2(a, b, &s.flux[j], &mut s.t1, &mut s.acc);
                }
                3 => {
                    let (a, b, c) = match j {
                        0 => (tab.dt(), tab.vt(), tab.vt()),
                        1 => (tab.vt(), tab.dt(), tab.vt()),
                        _ => (tab.vt(), tab.vt(), tab.dt()),
                    };
                    apply3(a, b, c, &s.flux[j], &mut s.t1, &mut s.t2, &mut s.acc);
                }
                _ => unreachable!(),
            }
            for i in 0..nloc {
                yl[i] += s.acc[i];
            }
        }
    }

    /// yl += V^T vals (integration against test values).
    fn integrate_values(&self, tab: &Tables, s: &mut Scratch, yl: &mut [f64]) {
        let nloc = tab.n1.pow(self.dim as u32);
        match self.dim {
            2 => apply2(tab.vt(), tab.vt(), &s.vals, &mut s.t1, &mut s.acc),
            3 => apply3(tab.vt(), tab.vt(), tab.vt(), &s.vals, &mut s.t1, &mut s.t2, &mut s.acc),
            _ => unreachable!(),
        }
        for i in 0..nloc {
            yl[i] += s.acc[i];
        }
    }

    /// Element kernel of the A block acting on one scalar-component local
    /// vector (the kernel is identical for every velocity component).
    fn element_a_scalar(&self, cell: usize, xl: &[f64], yl: &mut [f64], s: &mut Scratch) {
        let dim = self.dim;
        self.local_gradients(&self.tab_v, xl, s);
        for q in 0..self.geo.nq {
            let ijt = self.geo.inv_jt(dim, cell, q);
            let w = self.mu * self.geo.jxw(cell, q);
            // Physical gradient g = J^{-T} ghat, flux qhat = J^{-1} (w g).
            let mut g = [0.0f64; 3];
            for r in 0..dim {
                let mut acc = 0.0;
                for c in 0..dim {
                    acc += ijt[r * dim + c] * s.grads[c][q];
                }
                g[r] = w * acc;
            }
            for c in 0..dim {
                let mut acc = 0.0;
                for r in 0..dim {
                    acc += ijt[r * dim + c] * g[r];
                }
                s.flux[c][q] = acc;
            }
        }
        yl.fill(0.0);
        self.integrate_gradients(&self.tab_v, s, yl);
        if self.gamma_rho != 0.0 {
            self.local_values(&self.tab_v, xl, s);
            for q in 0..self.geo.nq {
                s.vals[q] *= self.gamma_rho * self.geo.jxw(cell, q);
            }
            self.integrate_values(&self.tab_v, s, yl);
        }
    }

    fn mask_velocity(&self, u: &[f64], mode: ApplyMode) -> Vec<f64> {
        let mut work = u.to_vec();
        if mode != ApplyMode::Raw {
            self.dofmap.zero_constrained(&mut work);
        }
        work
    }

    /// Apply the output-side constraint convention.
    fn finalize_velocity_output(&self, u_in: &[f64], out: &mut [f64], mode: ApplyMode) {
        let d = self.dim;
        match mode {
            ApplyMode::Raw => {}
            ApplyMode::Residual => self.dofmap.zero_constrained(out),
            ApplyMode::Smoothing => {
                for (node, &fixed) in self.dofmap.dirichlet.iter().enumerate() {
                    if fixed {
                        for c in 0..d {
                            out[node * d + c] = u_in[node * d + c];
                        }
                    }
                }
            }
        }
    }

    /// out = A u (viscous plus gamma*rho mass term) under the given mode.
    pub fn apply_a(&self, u: &[f64], out: &mut [f64], mode: ApplyMode) -> Result<()> {
        let d = self.dim;
        let n = self.dofmap.n_velocity();
        if u.len() != n || out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.len().max(out.len()),
            });
        }
        let work = self.mask_velocity(u, mode);
        out.fill(0.0);
        let nloc = self.dofmap.n_local_v();
        let mut s = self.scratch();
        let mut xl = vec![0.0; nloc];
        let mut yl = vec![0.0; nloc];
        for cell in 0..self.n_cells() {
            let dofs = self.dofmap.cell_dofs_v(cell);
            for comp in 0..d {
                for (i, &dof) in dofs.iter().enumerate() {
                    xl[i] = work[dof * d + comp];
                }
                self.element_a_scalar(cell, &xl, &mut yl, &mut s);
                for (i, &dof) in dofs.iter().enumerate() {
                    out[dof * d + comp] += yl[i];
                }
            }
        }
        self.finalize_velocity_output(u, out, mode);
        Ok(())
    }

    /// out = B u (b(u,q) = int q div u).
    pub fn apply_b(&self, u: &[f64], out: &mut [f64], mode: ApplyMode) -> Result<()> {
        let d = self.dim;
        let n = self.dofmap.n_velocity();
        let m = self.dofmap.n_pressure();
        if u.len() != n || out.len() != m {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        let work = self.mask_velocity(u, mode);
        out.fill(0.0);
        let nloc_v = self.dofmap.n_local_v();
        let nloc_p = self.dofmap.n_local_p();
        let mut s = self.scratch();
        let mut xl = vec![0.0; nloc_v];
        let mut div = vec![0.0; self.geo.nq];
        let mut yl = vec![0.0; nloc_p];
        for cell in 0..self.n_cells() {
            let dofs_v = self.dofmap.cell_dofs_v(cell);
            div.fill(0.0);
            for comp in 0..d {
                for (i, &dof) in dofs_v.iter().enumerate() {
                    xl[i] = work[dof * d + comp];
                }
                self.local_gradients(&self.tab_v, &xl, &mut s);
                for q in 0..self.geo.nq {
                    let ijt = self.geo.inv_jt(d, cell, q);
                    let mut acc = 0.0;
                    for j in 0..d {
                        acc += ijt[comp * d + j] * s.grads[j][q];
                    }
                    div[q] += acc;
                }
            }
            for q in 0..self.geo.nq {
                s.vals[q] = div[q] * self.geo.jxw(cell, q);
            }
            yl.fill(0.0);
            self.integrate_values(&self.tab_p, &mut s, &mut yl);
            let dofs_p = self.dofmap.cell_dofs_p(cell);
            for (i, &dof) in dofs_p.iter().enumerate() {
                out[dof] += yl[i];
            }
        }
        Ok(())
    }

    /// out = B^T p (constrained rows zeroed unless Raw).
    pub fn apply_bt(&self, p: &[f64], out: &mut [f64], mode: ApplyMode) -> Result<()> {
        let d = self.dim;
        let n = self.dofmap.n_velocity();
        let m = self.dofmap.n_pressure();
        if p.len() != m || out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: p.len(),
            });
        }
        out.fill(0.0);
        let nloc_v = self.dofmap.n_local_v();
        let nloc_p = self.dofmap.n_local_p();
        let mut s = self.scratch();
        let mut pl = vec![0.0; nloc_p];
        let mut pq = vec![0.0; self.geo.nq];
        let mut yl = vec![0.0; nloc_v];
        for cell in 0..self.n_cells() {
            let dofs_p = self.dofmap.cell_dofs_p(cell);
            for (i, &dof) in dofs_p.iter().enumerate() {
                pl[i] = p[dof];
            }
            self.local_values(&self.tab_p, &pl, &mut s);
            pq.copy_from_slice(&s.vals[..self.geo.nq]);
            let dofs_v = self.dofmap.cell_dofs_v(cell);
            for comp in 0..d {
                for q in 0..self.geo.nq {
                    let ijt = self.geo.inv_jt(d, cell, q);
                    let sq = pq[q] * self.geo.jxw(cell, q);
                    for j in 0..d {
                        s.flux[j][q] = sq * ijt[comp * d + j];
                    }
                }
                yl.fill(0.0);
                self.integrate_gradients(&self.tab_v, &mut s, &mut yl);
                for (i, &dof) in dofs_v.iter().enumerate() {
                    out[dof * d + comp] += yl[i];
                }
            }
        }
        if mode != ApplyMode::Raw {
            self.dofmap.zero_constrained(out);
        }
        Ok(())
    }

    /// out = M_v u (velocity mass matrix).
    pub fn apply_mv(&self, u: &[f64], out: &mut [f64], mode: ApplyMode) -> Result<()> {
        let d = self.dim;
        let n = self.dofmap.n_velocity();
        if u.len() != n || out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        let work = self.mask_velocity(u, mode);
        out.fill(0.0);
        let nloc = self.dofmap.n_local_v();
        let mut s = self.scratch();
        let mut xl = vec![0.0; nloc];
        let mut yl = vec![0.0; nloc];
        for cell in 0..self.n_cells() {
            let dofs = self.dofmap.cell_dofs_v(cell);
            for comp in 0..d {
                for (i, &dof) in dofs.iter().enumerate() {
                    xl[i] = work[dof * d + comp];
                }
                self.local_values(&self.tab_v, &xl, &mut s);
                for q in 0..self.geo.nq {
                    s.vals[q] *= self.geo.jxw(cell, q);
                }
                yl.fill(0.0);
                self.integrate_values(&self.tab_v, &mut s, &mut yl);
                for (i, &dof) in dofs.iter().enumerate() {
                    out[dof * d + comp] += yl[i];
                }
            }
        }
        self.finalize_velocity_output(u, out, mode);
        Ok(())
    }

    /// out = M_p p (pressure mass matrix; pressure dofs are unconstrained).
    pub fn apply_mp(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        let m = self.dofmap.n_pressure();
        if p.len() != m || out.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: p.len(),
            });
        }
        out.fill(0.0);
        let nloc = self.dofmap.n_local_p();
        let mut s = self.scratch();
        let mut xl = vec![0.0; nloc];
        let mut yl = vec![0.0; nloc];
        for cell in 0..self.n_cells() {
            let dofs = self.dofmap.cell_dofs_p(cell);
            for (i, &dof) in dofs.iter().enumerate() {
                xl[i] = p[dof];
            }
            self.local_values(&self.tab_p, &xl, &mut s);
            for q in 0..self.geo.nq {
                s.vals[q] *= self.geo.jxw(cell, q);
            }
            yl.fill(0.0);
            self.integrate_values(&self.tab_p, &mut s, &mut yl);
            for (i, &dof) in dofs.iter().enumerate() {
                out[dof] += yl[i];
            }
        }
        Ok(())
    }

    /// Full saddle-point action (A u + B^T p, B u).
    ///
    /// Only `Raw` and `Residual` modes are meaningful for the full K.
    pub fn apply_k(&self, x: &BlockVector, mode: ApplyMode) -> Result<BlockVector> {
        assert!(mode != ApplyMode::Smoothing, "apply_k: use Raw or Residual");
        let mut out = BlockVector {
            u: vec![0.0; self.dofmap.n_velocity()],
            p: vec![0.0; self.dofmap.n_pressure()],
        };
        let mut tmp = vec![0.0; self.dofmap.n_velocity()];
        self.apply_a(&x.u, &mut out.u, mode)?;
        self.apply_bt(&x.p, &mut tmp, mode)?;
        crate::util::axpy(1.0, &tmp, &mut out.u);
        self.apply_b(&x.u, &mut out.p, mode)?;
        Ok(out)
    }

    /// Exact diagonal of the assembled A block, computed matrix-free by
    /// pushing local unit vectors through the element kernel, keeping the
    /// matching local entry and scatter-adding. Constrained entries are set
    /// to 1 (identity rows in smoothing contexts).
    pub fn compute_diag_a(&self) -> Vec<f64> {
        let d = self.dim;
        let nloc = self.dofmap.n_local_v();
        let mut diag = vec![0.0; self.dofmap.n_velocity()];
        let mut s = self.scratch();
        let mut e = vec![0.0; nloc];
        let mut yl = vec![0.0; nloc];
        for cell in 0..self.n_cells() {
            let dofs = self.dofmap.cell_dofs_v(cell);
            for i in 0..nloc {
                e[i] = 1.0;
                self.element_a_scalar(cell, &e, &mut yl, &mut s);
                e[i] = 0.0;
                // The scalar kernel is identical for every component.
                for comp in 0..d {
                    diag[dofs[i] * d + comp] += yl[i];
                }
            }
        }
        for (node, &fixed) in self.dofmap.dirichlet.iter().enumerate() {
            if fixed {
                for comp in 0..d {
                    diag[node * d + comp] = 1.0;
                }
            }
        }
        diag
    }

    /// Exact diagonal of the pressure mass matrix (choice D~_{S~p}).
    pub fn compute_diag_mp(&self) -> Vec<f64> {
        let nloc = self.dofmap.n_local_p();
        let mut diag = vec![0.0; self.dofmap.n_pressure()];
        let mut s = self.scratch();
        let mut e = vec![0.0; nloc];
        let mut yl = vec![0.0; nloc];
        for cell in 0..self.n_cells() {
            let dofs = self.dofmap.cell_dofs_p(cell);
            for i in 0..nloc {
                e[i] = 1.0;
                self.local_values(&self.tab_p, &e, &mut s);
                e[i] = 0.0;
                for q in 0..self.geo.nq {
                    s.vals[q] *= self.geo.jxw(cell, q);
                }
                yl.fill(0.0);
                self.integrate_values(&self.tab_p, &mut s, &mut yl);
                diag[dofs[i]] += yl[i];
            }
        }
        diag
    }

    /// Element-local Schur diagonal approximation (choice D~_{S~loc}):
    /// sum_tau P_tau^T diag(B_tau diag(A_tau)^{-1} B_tau^T) P_tau with all
    /// element quantities formed on the fly. Constrained velocity columns
    /// are eliminated per the shared constraint policy.
    pub fn compute_schur_diag_local(&self) -> Result<Vec<f64>> {
        let d = self.dim;
        let nloc_v = self.dofmap.n_local_v();
        let nloc_p = self.dofmap.n_local_p();
        let mut out = vec![0.0; self.dofmap.n_pressure()];
        let mut s = self.scratch();
        let mut e = vec![0.0; nloc_v];
        let mut yl = vec![0.0; nloc_v];
        let mut diag_a_loc = vec![0.0; nloc_v];
        let mut b_tau = vec![0.0; nloc_p * nloc_v * d];
        let mut pl = vec![0.0; nloc_p];
        for cell in 0..self.n_cells() {
            let dofs_v = self.dofmap.cell_dofs_v(cell);
            let dofs_p = self.dofmap.cell_dofs_p(cell);
            // Element-local diagonal of A (no neighbor accumulation).
            for i in 0..nloc_v {
                e[i] = 1.0;
                self.element_a_scalar(cell, &e, &mut yl, &mut s);
                e[i] = 0.0;
                diag_a_loc[i] = yl[i];
            }
            // Element matrix B_tau column by column through the divergence
            // kernel applied to local velocity unit vectors.
            for i in 0..nloc_v {
                e[i] = 1.0;
                self.local_gradients(&self.tab_v, &e, &mut s);
                e[i] = 0.0;
                // Keep the reference gradients; they are overwritten by the
                // next unit vector, so finish both components now.
                for comp in 0..d {
                    for q in 0..self.geo.nq {
                        let ijt = self.geo.inv_jt(d, cell, q);
                        let mut acc = 0.0;
                        for j in 0..d {
                            acc += ijt[comp * d + j] * s.grads[j][q];
                        }
                        s.vals[q] = acc * self.geo.jxw(cell, q);
                    }
                    pl.fill(0.0);
                    self.integrate_values(&self.tab_p, &mut s, &mut pl);
                    for j in 0..nloc_p {
                        b_tau[(j * nloc_v + i) * d + comp] = pl[j];
                    }
                }
            }
            for j in 0..nloc_p {
                let mut acc = 0.0;
                for i in 0..nloc_v {
                    if self.dofmap.dirichlet[dofs_v[i]] {
                        continue;
                    }
                    let da = diag_a_loc[i];
                    if da <= 0.0 {
                        return Err(Error::SingularDiagonal(dofs_v[i]));
                    }
                    for comp in 0..d {
                        let bij = b_tau[(j * nloc_v + i) * d + comp];
                        acc += bij * bij / da;
                    }
                }
                out[dofs_p[j]] += acc;
            }
        }
        Ok(out)
    }

    /// Right-hand-side vector for a body force: int f . v dx per velocity
    /// test function (raw, no constraint handling).
    pub fn assemble_load(&self, f: &dyn Fn([f64; 3]) -> [f64; 3]) -> BlockVector {
        let d = self.dim;
        let nloc = self.dofmap.n_local_v();
        let mut out = BlockVector {
            u: vec![0.0; self.dofmap.n_velocity()],
            p: vec![0.0; self.dofmap.n_pressure()],
        };
        let mut s = self.scratch();
        let mut yl = vec![0.0; nloc];
        let mut fq = vec![[0.0f64; 3]; self.geo.nq];
        for cell in 0..self.n_cells() {
            for (q, item) in fq.iter_mut().enumerate() {
                *item = f(self.geo.point(cell, q));
            }
            let dofs = self.dofmap.cell_dofs_v(cell);
            for comp in 0..d {
                for q in 0..self.geo.nq {
                    s.vals[q] = fq[q][comp] * self.geo.jxw(cell, q);
                }
                yl.fill(0.0);
                self.integrate_values(&self.tab_v, &mut s, &mut yl);
                for (i, &dof) in dofs.iter().enumerate() {
                    out.u[dof * d + comp] += yl[i];
                }
            }
        }
        out
    }
}
