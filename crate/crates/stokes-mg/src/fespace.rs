//! Taylor-Hood Q_k-Q_{k-1} spaces: tensor-product Lagrange bases, per-level
//! degree-of-freedom numbering, Dirichlet constraints and the zero-mean
//! pressure projection.
//!
//! Scalar dofs are numbered deterministically by first touch while walking
//! cells in order and local tensor nodes in lexicographic order; shared
//! nodes are identified geometrically (quantized positions), which makes the
//! numbering independent of face/edge orientation conventions. Velocity
//! dofs interleave components: `dof = node * dim + comp`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::mesh::LevelMesh;
use crate::quadrature::{gauss_legendre, QuadratureRule};

/// 1d Lagrange basis on equispaced nodes i/k in [0, 1].
#[derive(Debug, Clone)]
pub struct Lagrange1d {
    pub degree: usize,
    pub nodes: Vec<f64>,
}

impl Lagrange1d {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 1);
        let nodes = (0..=degree).map(|i| i as f64 / degree as f64).collect();
        Self { degree, nodes }
    }

    /// Value of shape function i at x.
    pub fn eval(&self, i: usize, x: f64) -> f64 {
        let xi = self.nodes[i];
        let mut v = 1.0;
        for (j, &xj) in self.nodes.iter().enumerate() {
            if j != i {
                v *= (x - xj) / (xi - xj);
            }
        }
        v
    }

    /// Derivative of shape function i at x.
    pub fn eval_deriv(&self, i: usize, x: f64) -> f64 {
        let xi = self.nodes[i];
        let mut d = 0.0;
        for (l, &xl) in self.nodes.iter().enumerate() {
            if l == i {
                continue;
            }
            let mut term = 1.0 / (xi - xl);
            for (j, &xj) in self.nodes.iter().enumerate() {
                if j != i && j != l {
                    term *= (x - xj) / (xi - xj);
                }
            }
            d += term;
        }
        d
    }
}

/// Tabulated 1d shape values/derivatives at a set of points.
/// Layout is row-major `[point][function]`.
#[derive(Debug, Clone)]
pub struct ShapeTable {
    pub n_pts: usize,
    pub n_fns: usize,
    pub val: Vec<f64>,
    pub der: Vec<f64>,
}

impl ShapeTable {
    pub fn tabulate(basis: &Lagrange1d, points: &[f64]) -> Self {
        let n_fns = basis.degree + 1;
        let n_pts = points.len();
        let mut val = vec![0.0; n_pts * n_fns];
        let mut der = vec![0.0; n_pts * n_fns];
        for (q, &x) in points.iter().enumerate() {
            for i in 0..n_fns {
                val[q * n_fns + i] = basis.eval(i, x);
                der[q * n_fns + i] = basis.eval_deriv(i, x);
            }
        }
        Self {
            n_pts,
            n_fns,
            val,
            der,
        }
    }
}

/// Tensor-product basis of one field: 1d nodes plus precomputed tables at
/// the 1d Gauss points shared by all bilinear forms.
#[derive(Debug, Clone)]
pub struct TensorBasis {
    pub degree: usize,
    pub basis1d: Lagrange1d,
    pub quad: QuadratureRule,
    pub table: ShapeTable,
}

impl TensorBasis {
    /// Basis of the given degree tabulated at an `n_q`-point Gauss rule.
    pub fn new(degree: usize, n_q: usize) -> Self {
        let basis1d = Lagrange1d::new(degree);
        let quad = gauss_legendre(n_q);
        let table = ShapeTable::tabulate(&basis1d, &quad.points);
        Self {
            degree,
            basis1d,
            quad,
            table,
        }
    }
}

/// Velocity/pressure partitioned coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(dofmap: &DofMap) -> Self {
        Self {
            u: vec![0.0; dofmap.n_velocity()],
            p: vec![0.0; dofmap.n_pressure()],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            u: vec![0.0; self.u.len()],
            p: vec![0.0; self.p.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len() + self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        crate::util::dot(&self.u, &other.u) + crate::util::dot(&self.p, &other.p)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// self += alpha * other
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        crate::util::axpy(alpha, &other.u, &mut self.u);
        crate::util::axpy(alpha, &other.p, &mut self.p);
    }

    pub fn scale(&mut self, alpha: f64) {
        crate::util::scale(alpha, &mut self.u);
        crate::util::scale(alpha, &mut self.p);
    }

    pub fn fill(&mut self, v: f64) {
        self.u.fill(v);
        self.p.fill(v);
    }

    /// Flatten to a single vector (velocity block first).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.u);
        out.extend_from_slice(&self.p);
        out
    }

    pub fn from_flat(dofmap: &DofMap, flat: &[f64]) -> Self {
        let n = dofmap.n_velocity();
        Self {
            u: flat[..n].to_vec(),
            p: flat[n..].to_vec(),
        }
    }
}

/// Sentinel for "node carries no boundary id".
pub const NO_BOUNDARY_ID: u32 = u32::MAX;

/// Per-level Taylor-Hood degree-of-freedom numbering.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub level: usize,
    pub dim: usize,
    /// Velocity degree k (pressure degree is k-1).
    pub degree: usize,
    /// Level mesh size (maximum edge length).
    pub h: f64,
    pub n_cells: usize,
    pub n_scalar_v: usize,
    pub n_scalar_p: usize,
    /// Per cell, stride (k+1)^d: local lexicographic node -> scalar dof.
    pub cell_dofs_v: Vec<usize>,
    /// Per cell, stride k^d.
    pub cell_dofs_p: Vec<usize>,
    pub node_coords_v: Vec<[f64; 3]>,
    pub node_coords_p: Vec<[f64; 3]>,
    /// Scalar velocity nodes with Dirichlet constraints (all components).
    pub dirichlet: Vec<bool>,
    /// Winning boundary id per constrained node (NO_BOUNDARY_ID otherwise).
    pub node_boundary_id: Vec<u32>,
    pub pressure_mean_constrained: bool,
    /// Integrals of the pressure basis functions over the domain.
    pub pressure_weights: Vec<f64>,
}

impl DofMap {
    pub fn n_velocity(&self) -> usize {
        self.dim * self.n_scalar_v
    }

    pub fn n_pressure(&self) -> usize {
        self.n_scalar_p
    }

    pub fn n_total(&self) -> usize {
        self.n_velocity() + self.n_pressure()
    }

    pub fn n_local_v(&self) -> usize {
        (self.degree + 1).pow(self.dim as u32)
    }

    pub fn n_local_p(&self) -> usize {
        self.degree.pow(self.dim as u32)
    }

    pub fn cell_dofs_v(&self, cell: usize) -> &[usize] {
        let s = self.n_local_v();
        &self.cell_dofs_v[cell * s..(cell + 1) * s]
    }

    pub fn cell_dofs_p(&self, cell: usize) -> &[usize] {
        let s = self.n_local_p();
        &self.cell_dofs_p[cell * s..(cell + 1) * s]
    }

    /// Zero the constrained entries of a velocity vector.
    pub fn zero_constrained(&self, u: &mut [f64]) {
        debug_assert_eq!(u.len(), self.n_velocity());
        for (node, &fixed) in self.dirichlet.iter().enumerate() {
            if fixed {
                for c in 0..self.dim {
                    u[node * self.dim + c] = 0.0;
                }
            }
        }
    }

    pub fn n_constrained_nodes(&self) -> usize {
        self.dirichlet.iter().filter(|&&b| b).count()
    }
}

/// Geometric key for identifying shared nodes across cells.
struct NodeLocator {
    quantum: f64,
    tol: f64,
    buckets: BTreeMap<(i64, i64, i64), Vec<usize>>,
    coords: Vec<[f64; 3]>,
}

impl NodeLocator {
    fn new() -> Self {
        Self {
            quantum: 1e-6,
            tol: 1e-8,
            buckets: BTreeMap::new(),
            coords: Vec::new(),
        }
    }

    fn key(&self, p: [f64; 3]) -> (i64, i64, i64) {
        (
            (p[0] / self.quantum).round() as i64,
            (p[1] / self.quantum).round() as i64,
            (p[2] / self.quantum).round() as i64,
        )
    }

    /// Index of the node at p, inserting it on first touch.
    fn locate_or_insert(&mut self, p: [f64; 3]) -> usize {
        let base = self.key(p);
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let k = (base.0 + dx, base.1 + dy, base.2 + dz);
                    if let Some(list) = self.buckets.get(&k) {
                        for &idx in list {
                            let q = self.coords[idx];
                            if (p[0] - q[0]).abs() <= self.tol
                                && (p[1] - q[1]).abs() <= self.tol
                                && (p[2] - q[2]).abs() <= self.tol
                            {
                                return idx;
                            }
                        }
                    }
                }
            }
        }
        let idx = self.coords.len();
        self.coords.push(p);
        self.buckets.entry(base).or_default().push(idx);
        idx
    }
}

/// Reference coordinates of local tensor node `i` (lexicographic, x fastest)
/// for a 1d node set `nodes`.
fn local_node_xi(dim: usize, nodes: &[f64], mut i: usize) -> [f64; 3] {
    let n1 = nodes.len();
    let mut xi = [0.0f64; 3];
    for item in xi.iter_mut().take(dim) {
        *item = nodes[i % n1];
        i /= n1;
    }
    xi
}

fn number_scalar_field(mesh: &LevelMesh, nodes1d: &[f64]) -> (usize, Vec<usize>, Vec<[f64; 3]>) {
    let dim = mesh.dim;
    let n_local = nodes1d.len().pow(dim as u32);
    let mut locator = NodeLocator::new();
    let mut cell_dofs = Vec::with_capacity(mesh.n_cells() * n_local);
    for c in 0..mesh.n_cells() {
        let verts = mesh.cell_vertices(c);
        for i in 0..n_local {
            let xi = local_node_xi(dim, nodes1d, i);
            let p = map_point(mesh, verts, xi);
            cell_dofs.push(locator.locate_or_insert(p));
        }
    }
    (locator.coords.len(), cell_dofs, locator.coords)
}

/// Multilinear map of a point (position only).
fn map_point(mesh: &LevelMesh, verts: &[usize], xi: [f64; 3]) -> [f64; 3] {
    let dim = mesh.dim;
    let mut p = [0.0f64; 3];
    for (v, &vert) in verts.iter().enumerate() {
        let x = mesh.coords[vert];
        let mut w = 1.0;
        for d in 0..dim {
            let bit = (v >> d) & 1;
            w *= if bit == 1 { xi[d] } else { 1.0 - xi[d] };
        }
        for k in 0..dim {
            p[k] += w * x[k];
        }
    }
    p
}

/// Build the Taylor-Hood dof numbering for velocity degree `k` (k >= 2).
pub fn build_dofmap(mesh: &LevelMesh, k: usize) -> Result<DofMap> {
    if k < 2 {
        return Err(Error::UnsupportedDegree(k));
    }
    let v_basis = Lagrange1d::new(k);
    let p_basis = Lagrange1d::new(k - 1);
    let (n_scalar_v, cell_dofs_v, node_coords_v) = number_scalar_field(mesh, &v_basis.nodes);
    let (n_scalar_p, cell_dofs_p, node_coords_p) = number_scalar_field(mesh, &p_basis.nodes);
    let mut dofmap = DofMap {
        level: mesh.level,
        dim: mesh.dim,
        degree: k,
        h: mesh.h_max,
        n_cells: mesh.n_cells(),
        n_scalar_v,
        n_scalar_p,
        cell_dofs_v,
        cell_dofs_p,
        node_coords_v,
        node_coords_p,
        dirichlet: vec![false; n_scalar_v],
        node_boundary_id: vec![NO_BOUNDARY_ID; n_scalar_v],
        pressure_mean_constrained: false,
        pressure_weights: Vec::new(),
    };
    dofmap.pressure_weights = compute_pressure_weights(mesh, &dofmap)?;
    Ok(dofmap)
}

/// Local velocity-node indices lying on a given local face.
pub fn face_local_nodes(dim: usize, degree: usize, face: usize) -> Vec<usize> {
    let n1 = degree + 1;
    let axis = face / 2;
    let side = (face % 2) * degree;
    let n_local = n1.pow(dim as u32);
    (0..n_local)
        .filter(|&i| {
            let mut idx = i;
            let mut digits = [0usize; 3];
            for item in digits.iter_mut().take(dim) {
                *item = idx % n1;
                idx /= n1;
            }
            digits[axis] == side
        })
        .collect()
}

/// Mark Dirichlet velocity nodes for the given boundary ids.
///
/// Ids are processed in the given order and later entries win at shared
/// nodes (corners/edges), so the moving-lid id should come last.
pub fn mark_dirichlet(dofmap: &mut DofMap, mesh: &LevelMesh, ids: &[u32]) {
    for &id in ids {
        for bf in &mesh.boundary_faces {
            if bf.id != id {
                continue;
            }
            for &local in &face_local_nodes(dofmap.dim, dofmap.degree, bf.face) {
                let node = dofmap.cell_dofs_v(bf.cell)[local];
                dofmap.dirichlet[node] = true;
                dofmap.node_boundary_id[node] = id;
            }
        }
    }
}

/// Set constrained velocity entries to the nodal interpolant of the boundary
/// function; all other entries are left unchanged.
pub fn apply_dirichlet(
    dofmap: &DofMap,
    bc: &dyn Fn([f64; 3], u32) -> [f64; 3],
    vec: &mut BlockVector,
) {
    let d = dofmap.dim;
    for node in 0..dofmap.n_scalar_v {
        if dofmap.dirichlet[node] {
            let vals = bc(dofmap.node_coords_v[node], dofmap.node_boundary_id[node]);
            for c in 0..d {
                vec.u[node * d + c] = vals[c];
            }
        }
    }
}

/// Integrals of the pressure basis functions, used for the discrete
/// zero-mean projection.
fn compute_pressure_weights(mesh: &LevelMesh, dofmap: &DofMap) -> Result<Vec<f64>> {
    let k = dofmap.degree;
    let basis = TensorBasis::new(k - 1, k + 1);
    let dim = mesh.dim;
    let nq1 = basis.quad.len();
    let n1 = k; // pressure has k nodes per direction
    let mut w = vec![0.0; dofmap.n_scalar_p];
    // Quadrature points of the tensor rule in lexicographic order.
    let nq = nq1.pow(dim as u32);
    let mut ref_pts = Vec::with_capacity(nq);
    for q in 0..nq {
        ref_pts.push(local_node_xi(dim, &basis.quad.points, q));
    }
    for c in 0..mesh.n_cells() {
        let mapped = mesh.cell_mapping(c, &ref_pts)?;
        let dofs = dofmap.cell_dofs_p(c);
        for (q, mp) in mapped.iter().enumerate() {
            // Tensor weight and shape values at point q.
            let mut qi = q;
            let mut qdigits = [0usize; 3];
            for item in qdigits.iter_mut().take(dim) {
                *item = qi % nq1;
                qi /= nq1;
            }
            let mut wq = 1.0;
            for item in qdigits.iter().take(dim) {
                wq *= basis.quad.weights[*item];
            }
            let jxw = mp.det * wq;
            for (i, &dof) in dofs.iter().enumerate() {
                let mut idx = i;
                let mut phi = 1.0;
                for d in 0..dim {
                    let id1 = idx % n1;
                    idx /= n1;
                    phi *= basis.table.val[qdigits[d] * n1 + id1];
                }
                w[dof] += phi * jxw;
            }
        }
    }
    Ok(w)
}

/// Remove the discrete-mean component of the pressure:
/// p <- p - (w'p / w'1) 1, so the continuous mean of p_h vanishes.
pub fn pressure_mean_project(dofmap: &DofMap, p: &mut [f64]) {
    debug_assert_eq!(p.len(), dofmap.n_pressure());
    let w = &dofmap.pressure_weights;
    let wp: f64 = crate::util::dot(w, p);
    let w1: f64 = w.iter().sum();
    let c = wp / w1;
    for pi in p.iter_mut() {
        *pi -= c;
    }
}

/// Nodal interpolant of a velocity field.
pub fn interpolate_velocity(dofmap: &DofMap, f: &dyn Fn([f64; 3]) -> [f64; 3]) -> Vec<f64> {
    let d = dofmap.dim;
    let mut u = vec![0.0; dofmap.n_velocity()];
    for node in 0..dofmap.n_scalar_v {
        let vals = f(dofmap.node_coords_v[node]);
        for c in 0..d {
            u[node * d + c] = vals[c];
        }
    }
    u
}

/// Nodal interpolant of a pressure field.
pub fn interpolate_pressure(dofmap: &DofMap, f: &dyn Fn([f64; 3]) -> f64) -> Vec<f64> {
    (0..dofmap.n_scalar_p)
        .map(|node| f(dofmap.node_coords_p[node]))
        .collect()
}

/// Evaluate a scalar coefficient field (given by per-node values for one
/// field) at reference points of one cell. `scalar` has length
/// `n_scalar_v` or `n_scalar_p` depending on `pressure`.
pub fn eval_scalar_on_cell(
    dofmap: &DofMap,
    scalar: &[f64],
    cell: usize,
    pressure: bool,
    ref_pts: &[[f64; 3]],
) -> Vec<f64> {
    let dim = dofmap.dim;
    let basis = if pressure {
        Lagrange1d::new(dofmap.degree - 1)
    } else {
        Lagrange1d::new(dofmap.degree)
    };
    let n1 = basis.nodes.len();
    let dofs = if pressure {
        dofmap.cell_dofs_p(cell)
    } else {
        dofmap.cell_dofs_v(cell)
    };
    ref_pts
        .iter()
        .map(|xi| {
            let mut v = 0.0;
            for (i, &dof) in dofs.iter().enumerate() {
                let mut idx = i;
                let mut phi = 1.0;
                for item in xi.iter().take(dim) {
                    let id1 = idx % n1;
                    idx /= n1;
                    phi *= basis.eval(id1, *item);
                }
                v += phi * scalar[dof];
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_channel_with_cylinder, make_unit_hypercube, channel_ids};
    use crate::util::SplitMix64;

    #[test]
    fn partition_of_unity_and_kronecker() {
        for k in 1..=4 {
            let basis = Lagrange1d::new(k);
            let mut rng = SplitMix64::new(1);
            for _ in 0..20 {
                let x = rng.next_f64();
                let s: f64 = (0..=k).map(|i| basis.eval(i, x)).sum();
                assert!((s - 1.0).abs() < 1e-13);
                let ds: f64 = (0..=k).map(|i| basis.eval_deriv(i, x)).sum();
                assert!(ds.abs() < 1e-11);
            }
            for i in 0..=k {
                for j in 0..=k {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((basis.eval(i, basis.nodes[j]) - expect).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let basis = Lagrange1d::new(3);
        let eps = 1e-6;
        for i in 0..4 {
            for &x in &[0.12, 0.47, 0.93] {
                let fd = (basis.eval(i, x + eps) - basis.eval(i, x - eps)) / (2.0 * eps);
                assert!((basis.eval_deriv(i, x) - fd).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn dof_counts_single_cell_2d() {
        let h = make_unit_hypercube(2, 0);
        let dm = build_dofmap(&h.levels[0], 2).unwrap();
        assert_eq!(dm.n_scalar_v, 9);
        assert_eq!(dm.n_velocity(), 18);
        assert_eq!(dm.n_pressure(), 4);
        assert_eq!(dm.n_total(), 22);
    }

    #[test]
    fn dof_counts_2x2_2d() {
        let h = make_unit_hypercube(2, 1);
        let dm = build_dofmap(h.finest(), 2).unwrap();
        assert_eq!(dm.n_scalar_v, 25);
        assert_eq!(dm.n_velocity(), 50);
        assert_eq!(dm.n_pressure(), 9);
        assert_eq!(dm.n_total(), 59);
    }

    #[test]
    fn dof_counts_single_cell_3d() {
        let h = make_unit_hypercube(3, 0);
        let dm = build_dofmap(&h.levels[0], 2).unwrap();
        assert_eq!(dm.n_velocity(), 81);
        assert_eq!(dm.n_pressure(), 8);
    }

    #[test]
    fn low_degree_rejected() {
        let h = make_unit_hypercube(2, 0);
        assert_eq!(
            build_dofmap(&h.levels[0], 1).unwrap_err(),
            Error::UnsupportedDegree(1)
        );
    }

    #[test]
    fn shared_nodes_are_identified() {
        // On a 2x2 mesh each interior edge node must appear in exactly the
        // cells that share it; count distinct dofs touched.
        let h = make_unit_hypercube(2, 2);
        let dm = build_dofmap(h.finest(), 2).unwrap();
        let mut touched = vec![0usize; dm.n_scalar_v];
        for c in 0..dm.n_cells {
            for &d in dm.cell_dofs_v(c) {
                touched[d] += 1;
            }
        }
        assert!(touched.iter().all(|&t| (1..=4).contains(&t)));
        // (2^2*2+1)^2 = 81 scalar velocity nodes on a 4x4 grid of Q2 cells.
        assert_eq!(dm.n_scalar_v, 81);
    }

    #[test]
    fn dirichlet_marking_cavity_lid() {
        let h = make_unit_hypercube(2, 2);
        let mut dm = build_dofmap(h.finest(), 2).unwrap();
        // Walls first, lid (y=1, id 3) last so it wins the corners.
        mark_dirichlet(&mut dm, h.finest(), &[0, 1, 2, 3]);
        let mut vec = BlockVector::zeros(&dm);
        apply_dirichlet(
            &dm,
            &|_, id| if id == 3 { [1.0, 0.0, 0.0] } else { [0.0; 3] },
            &mut vec,
        );
        for node in 0..dm.n_scalar_v {
            let p = dm.node_coords_v[node];
            let on_top = (p[1] - 1.0).abs() < 1e-12;
            let on_boundary = p[0].abs() < 1e-12
                || (p[0] - 1.0).abs() < 1e-12
                || p[1].abs() < 1e-12
                || on_top;
            assert_eq!(dm.dirichlet[node], on_boundary);
            if on_top {
                assert_eq!(vec.u[node * 2], 1.0);
                assert_eq!(vec.u[node * 2 + 1], 0.0);
            } else if on_boundary {
                assert_eq!(vec.u[node * 2], 0.0);
            }
        }
    }

    #[test]
    fn turek_inflow_midline_value() {
        let h = make_channel_with_cylinder();
        let mut dm = build_dofmap(h.finest(), 2).unwrap();
        mark_dirichlet(
            &mut dm,
            h.finest(),
            &[channel_ids::WALL, channel_ids::CYLINDER, channel_ids::INFLOW],
        );
        let mut vec = BlockVector::zeros(&dm);
        let vmax = 1.0;
        apply_dirichlet(
            &dm,
            &|p, id| {
                if id == channel_ids::INFLOW {
                    [4.0 * vmax * p[1] * (0.41 - p[1]) / (0.41 * 0.41), 0.0, 0.0]
                } else {
                    [0.0; 3]
                }
            },
            &mut vec,
        );
        // The Q2 midpoint node of the left edge sits at x2 = 0.205/2 + ...;
        // look for the node at exactly (0, 0.205).
        let node = (0..dm.n_scalar_v)
            .find(|&n| {
                let p = dm.node_coords_v[n];
                p[0].abs() < 1e-12 && (p[1] - 0.205).abs() < 1e-12
            })
            .expect("midline inflow node exists");
        assert!((vec.u[node * 2] - 1.0).abs() < 1e-14);
        assert_eq!(vec.u[node * 2 + 1], 0.0);
    }

    #[test]
    fn pressure_weights_sum_to_domain_measure() {
        let h = make_unit_hypercube(2, 2);
        let dm = build_dofmap(h.finest(), 2).unwrap();
        let total: f64 = dm.pressure_weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        let h3 = make_unit_hypercube(3, 1);
        let dm3 = build_dofmap(h3.finest(), 2).unwrap();
        let total3: f64 = dm3.pressure_weights.iter().sum();
        assert!((total3 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn mean_projection_examples() {
        let h = make_unit_hypercube(2, 2);
        let dm = build_dofmap(h.finest(), 2).unwrap();
        // Constant 1 -> 0.
        let mut p = vec![1.0; dm.n_pressure()];
        pressure_mean_project(&dm, &mut p);
        assert!(crate::util::max_abs(&p) < 1e-14);
        // Interpolant of x1: mean 0.5 removed, integral zero afterwards.
        let mut p = interpolate_pressure(&dm, &|x| x[0]);
        pressure_mean_project(&dm, &mut p);
        let integral = crate::util::dot(&dm.pressure_weights, &p);
        assert!(integral.abs() < 1e-14);
        let node = (0..dm.n_scalar_p)
            .find(|&n| {
                let q = dm.node_coords_p[n];
                q[0].abs() < 1e-12 && q[1].abs() < 1e-12
            })
            .unwrap();
        assert!((p[node] - (0.0 - 0.5)).abs() < 1e-13);
        // Idempotence.
        let before = p.clone();
        pressure_mean_project(&dm, &mut p);
        assert!(crate::util::max_abs_diff(&before, &p) < 1e-14);
    }

    #[test]
    fn continuity_across_shared_faces() {
        // A global FE function evaluated from either neighbor of a shared
        // face agrees at shared points.
        let h = make_unit_hypercube(2, 1);
        let mesh = h.finest();
        let dm = build_dofmap(mesh, 2).unwrap();
        let mut rng = SplitMix64::new(4);
        let mut scalar = vec![0.0; dm.n_scalar_v];
        rng.fill_sym(&mut scalar);
        // Cells 0 (left-bottom) and 1 (right-bottom) share face x=1 of cell 0.
        for &t in &[0.0, 0.25, 0.6, 1.0] {
            let left = eval_scalar_on_cell(&dm, &scalar, 0, false, &[[1.0, t, 0.0]]);
            let right = eval_scalar_on_cell(&dm, &scalar, 1, false, &[[0.0, t, 0.0]]);
            assert!((left[0] - right[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        // The Q2 interpolant of x^2 y^2 (coordinate degree <= 2) is exact.
        let h = make_unit_hypercube(2, 1);
        let mesh = h.finest();
        let dm = build_dofmap(mesh, 2).unwrap();
        let f = |x: [f64; 3]| x[0] * x[0] * x[1] * x[1];
        let coeffs: Vec<f64> = (0..dm.n_scalar_v).map(|n| f(dm.node_coords_v[n])).collect();
        let mut rng = SplitMix64::new(12);
        for c in 0..dm.n_cells {
            for _ in 0..3 {
                let xi = [rng.next_f64(), rng.next_f64(), 0.0];
                let vals = eval_scalar_on_cell(&dm, &coeffs, c, false, &[xi]);
                let phys = mesh.cell_mapping(c, &[xi]).unwrap()[0].point;
                assert!((vals[0] - f(phys)).abs() < 1e-12);
            }
        }
    }
}
