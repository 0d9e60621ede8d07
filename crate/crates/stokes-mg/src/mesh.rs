//! Nested quadrilateral/hexahedral mesh hierarchies with uniform refinement,
//! curved-boundary snapping and multilinear cell mappings.
//!
//! Conventions (fixed for deterministic tensor-product tables):
//! - Reference element is (0,1)^d; cell corner `v` carries the reference
//!   coordinates given by the bits of its local index, x fastest:
//!   in 2d `v0=(0,0) v1=(1,0) v2=(0,1) v3=(1,1)`.
//! - Local face `f` is the plane `x_{f/2} = f%2` of the reference cell.
//! - Uniform refinement of cell `c` creates children `2^d*c + j`,
//!   `j = 0..2^d`, where the bits of `j` select the reference-subcube
//!   offset (again x fastest). Parent/child links are therefore pure
//!   index arithmetic and not stored.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// One boundary face: (cell index, local face 0..2d, boundary id).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub face: usize,
    pub id: u32,
}

/// Curved-geometry descriptor used to snap new boundary vertices during
/// refinement.
#[derive(Debug, Clone)]
pub enum GeometryDescriptor {
    None,
    /// 2d circle; vertices on faces with `boundary_id` are projected
    /// radially onto the circle.
    Circle {
        center: [f64; 2],
        radius: f64,
        boundary_id: u32,
    },
    /// 3d analogue: cylinder surface with axis parallel to z through
    /// `center`, snapping in the xy-plane only.
    CylinderSurface {
        center: [f64; 2],
        radius: f64,
        boundary_id: u32,
    },
}

impl GeometryDescriptor {
    pub fn boundary_id(&self) -> Option<u32> {
        match self {
            GeometryDescriptor::None => None,
            GeometryDescriptor::Circle { boundary_id, .. }
            | GeometryDescriptor::CylinderSurface { boundary_id, .. } => Some(*boundary_id),
        }
    }

    /// Project a point onto the curved boundary (identity for `None`).
    pub fn snap_point(&self, p: [f64; 3]) -> [f64; 3] {
        match *self {
            GeometryDescriptor::None => p,
            GeometryDescriptor::Circle { center, radius, .. }
            | GeometryDescriptor::CylinderSurface { center, radius, .. } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let r = (dx * dx + dy * dy).sqrt();
                if r == 0.0 {
                    return p;
                }
                let s = radius / r;
                [center[0] + dx * s, center[1] + dy * s, p[2]]
            }
        }
    }
}

/// One level of a nested quad/hex mesh hierarchy.
///
/// Cells are stored flat with stride `2^dim`; coordinates always carry three
/// components (z = 0 in 2d).
#[derive(Debug, Clone)]
pub struct LevelMesh {
    pub dim: usize,
    pub level: usize,
    pub coords: Vec<[f64; 3]>,
    cells: Vec<usize>,
    pub boundary_faces: Vec<BoundaryFace>,
    /// Maximum edge length over all cells (the level mesh size h).
    pub h_max: f64,
    refined: bool,
}

impl LevelMesh {
    pub fn verts_per_cell(&self) -> usize {
        1 << self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() >> self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn cell_vertices(&self, cell: usize) -> &[usize] {
        let s = self.verts_per_cell();
        &self.cells[cell * s..(cell + 1) * s]
    }

    /// Parent cell on the previous level; `None` on level 0.
    pub fn parent_of(&self, cell: usize) -> Option<usize> {
        if self.refined {
            Some(cell >> self.dim)
        } else {
            None
        }
    }

    /// Children on the next level (valid once this mesh has been refined).
    pub fn children_of(&self, cell: usize) -> core::ops::Range<usize> {
        (cell << self.dim)..((cell + 1) << self.dim)
    }

    fn from_parts(
        dim: usize,
        level: usize,
        coords: Vec<[f64; 3]>,
        cells: Vec<usize>,
        boundary_faces: Vec<BoundaryFace>,
        refined: bool,
    ) -> Self {
        let mut mesh = LevelMesh {
            dim,
            level,
            coords,
            cells,
            boundary_faces,
            h_max: 0.0,
            refined,
        };
        mesh.h_max = mesh.compute_h_max();
        mesh
    }

    fn compute_h_max(&self) -> f64 {
        let mut h: f64 = 0.0;
        for c in 0..self.n_cells() {
            let verts = self.cell_vertices(c);
            for e in reference_edges(self.dim) {
                let a = self.coords[verts[e.0]];
                let b = self.coords[verts[e.1]];
                let d2 = (0..3).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum::<f64>();
                h = h.max(d2.sqrt());
            }
        }
        h
    }

    /// Physical point, Jacobian, determinant and inverse-transpose of the
    /// multilinear map of `cell` at each given reference point.
    pub fn cell_mapping(&self, cell: usize, reference_points: &[[f64; 3]]) -> Result<Vec<MappedPoint>> {
        let verts = self.cell_vertices(cell);
        let mut out = Vec::with_capacity(reference_points.len());
        for &xi in reference_points {
            let mp = map_multilinear(self.dim, verts, &self.coords, xi);
            if mp.det <= 0.0 || !mp.det.is_finite() {
                return Err(Error::InvalidGeometry {
                    cell,
                    detail: "non-positive Jacobian determinant",
                });
            }
            out.push(mp);
        }
        Ok(out)
    }

    /// Check Jacobian positivity of every cell at a 3^d Gauss grid plus the
    /// reference corners.
    pub fn validate(&self) -> Result<()> {
        let pts = validation_points(self.dim);
        for c in 0..self.n_cells() {
            self.cell_mapping(c, &pts)?;
        }
        Ok(())
    }
}

/// Result of evaluating a multilinear cell map at one reference point.
#[derive(Debug, Clone, Copy)]
pub struct MappedPoint {
    pub point: [f64; 3],
    /// Row-major d x d Jacobian (dx_i/dxi_j), padded with identity beyond d.
    pub jacobian: [f64; 9],
    pub det: f64,
    /// Row-major d x d inverse-transpose of the Jacobian.
    pub inv_transpose: [f64; 9],
}

fn map_multilinear(dim: usize, verts: &[usize], coords: &[[f64; 3]], xi: [f64; 3]) -> MappedPoint {
    let nv = 1usize << dim;
    let mut point = [0.0f64; 3];
    let mut jac = [0.0f64; 9];
    for v in 0..nv {
        let x = coords[verts[v]];
        // Shape value of corner v and derivative wrt each direction.
        let mut w = 1.0;
        for d in 0..dim {
            let bit = (v >> d) & 1;
            w *= if bit == 1 { xi[d] } else { 1.0 - xi[d] };
        }
        for k in 0..dim {
            point[k] += w * x[k];
        }
        for j in 0..dim {
            let mut dw = 1.0;
            for d in 0..dim {
                let bit = (v >> d) & 1;
                if d == j {
                    dw *= if bit == 1 { 1.0 } else { -1.0 };
                } else {
                    dw *= if bit == 1 { xi[d] } else { 1.0 - xi[d] };
                }
            }
            for k in 0..dim {
                jac[k * 3 + j] += dw * x[k];
            }
        }
    }
    // Pad to identity so 3x3 algebra below stays valid in 2d.
    for k in dim..3 {
        jac[k * 3 + k] = 1.0;
    }
    let det3 = det3x3(&jac);
    let inv = inv3x3(&jac, det3);
    let mut inv_t = [0.0f64; 9];
    for i in 0..3 {
        for j in 0..3 {
            inv_t[i * 3 + j] = inv[j * 3 + i];
        }
    }
    MappedPoint {
        point,
        jacobian: jac,
        det: det3,
        inv_transpose: inv_t,
    }
}

fn det3x3(m: &[f64; 9]) -> f64 {
    m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6])
}

fn inv3x3(m: &[f64; 9], det: f64) -> [f64; 9] {
    let id = 1.0 / det;
    [
        (m[4] * m[8] - m[5] * m[7]) * id,
        (m[2] * m[7] - m[1] * m[8]) * id,
        (m[1] * m[5] - m[2] * m[4]) * id,
        (m[5] * m[6] - m[3] * m[8]) * id,
        (m[0] * m[8] - m[2] * m[6]) * id,
        (m[2] * m[3] - m[0] * m[5]) * id,
        (m[3] * m[7] - m[4] * m[6]) * id,
        (m[1] * m[6] - m[0] * m[7]) * id,
        (m[0] * m[4] - m[1] * m[3]) * id,
    ]
}

/// Reference-cell edges as local corner index pairs.
pub fn reference_edges(dim: usize) -> Vec<(usize, usize)> {
    let nv = 1usize << dim;
    let mut edges = Vec::new();
    for v in 0..nv {
        for d in 0..dim {
            if (v >> d) & 1 == 0 {
                edges.push((v, v | (1 << d)));
            }
        }
    }
    edges
}

/// Local corner indices of face `f` (axis f/2, side f%2), in lexicographic
/// order of the remaining axes.
pub fn face_corners(dim: usize, face: usize) -> Vec<usize> {
    let axis = face / 2;
    let side = face % 2;
    let nv = 1usize << dim;
    (0..nv)
        .filter(|v| (v >> axis) & 1 == side)
        .collect()
}

fn validation_points(dim: usize) -> Vec<[f64; 3]> {
    let g = gauss_legendre(3);
    let mut pts = Vec::new();
    let line: Vec<f64> = g.points.iter().copied().chain([0.0, 1.0]).collect();
    match dim {
        2 => {
            for &y in &line {
                for &x in &line {
                    pts.push([x, y, 0.0]);
                }
            }
        }
        3 => {
            for &z in &line {
                for &y in &line {
                    for &x in &line {
                        pts.push([x, y, z]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    pts
}

/// A nested hierarchy of uniformly refined meshes plus the geometry
/// descriptor used while refining.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    pub levels: Vec<LevelMesh>,
    pub geometry: GeometryDescriptor,
}

impl MeshHierarchy {
    pub fn finest(&self) -> &LevelMesh {
        self.levels.last().unwrap()
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Refine the current finest level once.
    pub fn refine(&mut self) -> Result<()> {
        let fine = refine_uniform(self.levels.last().unwrap(), &self.geometry)?;
        self.levels.push(fine);
        Ok(())
    }

    /// Drop the `n` coarsest levels, e.g. to start multigrid from a finer
    /// coarse mesh (parent/child index arithmetic between the remaining
    /// levels stays valid).
    pub fn drop_coarsest(&mut self, n: usize) {
        assert!(n < self.levels.len());
        self.levels.drain(..n);
    }
}

/// Nested hierarchy over the unit square/cube: level 0 is one cell, each
/// refinement splits every cell into 2^d congruent children.
pub fn make_unit_hypercube(dim: usize, initial_refinements: usize) -> MeshHierarchy {
    assert!(dim == 2 || dim == 3, "dim must be 2 or 3");
    let nv = 1usize << dim;
    let mut coords = Vec::with_capacity(nv);
    for v in 0..nv {
        let mut p = [0.0f64; 3];
        for d in 0..dim {
            p[d] = ((v >> d) & 1) as f64;
        }
        coords.push(p);
    }
    let cells: Vec<usize> = (0..nv).collect();
    // One boundary face per reference face; ids 0..2d follow the face index
    // (0: x=0, 1: x=1, 2: y=0, 3: y=1, 4: z=0, 5: z=1).
    let boundary_faces = (0..2 * dim)
        .map(|f| BoundaryFace {
            cell: 0,
            face: f,
            id: f as u32,
        })
        .collect();
    let level0 = LevelMesh::from_parts(dim, 0, coords, cells, boundary_faces, false);
    let mut hierarchy = MeshHierarchy {
        levels: vec![level0],
        geometry: GeometryDescriptor::None,
    };
    for _ in 0..initial_refinements {
        hierarchy.refine().expect("unit hypercube refinement is always valid");
    }
    hierarchy
}

/// Boundary ids of the channel-with-cylinder benchmark mesh.
pub mod channel_ids {
    pub const INFLOW: u32 = 1;
    pub const OUTFLOW: u32 = 2;
    pub const WALL: u32 = 3;
    pub const CYLINDER: u32 = 4;
}

/// Geometry of the channel benchmark: circle of radius 0.05 at (0.2, 0.2).
pub fn channel_cylinder_geometry() -> GeometryDescriptor {
    GeometryDescriptor::Circle {
        center: [0.2, 0.2],
        radius: 0.05,
        boundary_id: channel_ids::CYLINDER,
    }
}

/// Fixed coarse mesh of the channel (0,2.2) x (0,0.41) minus the disk of
/// diameter 0.1 centered at (0.2,0.2), loaded from the versioned data file.
pub fn make_channel_with_cylinder() -> MeshHierarchy {
    let text = include_str!("../data/channel_cylinder.mesh");
    let mesh = parse_mesh_text(text).expect("shipped channel mesh parses");
    mesh.validate().expect("shipped channel mesh is valid");
    MeshHierarchy {
        levels: vec![mesh],
        geometry: channel_cylinder_geometry(),
    }
}

/// Parse the plain-text mesh format (see data/channel_cylinder.mesh for the
/// format description). Lines starting with '#' are comments.
pub fn parse_mesh_text(text: &str) -> Result<LevelMesh> {
    let mut tokens = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split_whitespace());
    let mut next = |what: &str| -> Result<String> {
        tokens
            .next()
            .map(|s| s.to_string())
            .ok_or_else(|| Error::MeshFormat(format!("unexpected end of file, expected {what}")))
    };
    let expect_kw = |tok: String, kw: &str| -> Result<()> {
        if tok == kw {
            Ok(())
        } else {
            Err(Error::MeshFormat(format!("expected '{kw}', found '{tok}'")))
        }
    };
    let parse_usize = |s: String| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::MeshFormat(format!("bad integer '{s}'")))
    };
    let parse_f64 = |s: String| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::MeshFormat(format!("bad number '{s}'")))
    };

    expect_kw(next("dim")?, "dim")?;
    let dim = parse_usize(next("dimension")?)?;
    if dim != 2 && dim != 3 {
        return Err(Error::MeshFormat(format!("unsupported dimension {dim}")));
    }
    expect_kw(next("vertices")?, "vertices")?;
    let nv = parse_usize(next("vertex count")?)?;
    let mut coords = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut p = [0.0f64; 3];
        for item in p.iter_mut().take(dim) {
            *item = parse_f64(next("coordinate")?)?;
        }
        coords.push(p);
    }
    expect_kw(next("cells")?, "cells")?;
    let nc = parse_usize(next("cell count")?)?;
    let vpc = 1usize << dim;
    let mut cells = Vec::with_capacity(nc * vpc);
    for _ in 0..nc * vpc {
        let v = parse_usize(next("cell vertex")?)?;
        if v >= nv {
            return Err(Error::MeshFormat(format!("vertex index {v} out of range")));
        }
        cells.push(v);
    }
    expect_kw(next("boundary")?, "boundary")?;
    let nb = parse_usize(next("boundary count")?)?;
    let mut boundary_faces = Vec::with_capacity(nb);
    for _ in 0..nb {
        let cell = parse_usize(next("boundary cell")?)?;
        let face = parse_usize(next("boundary face")?)?;
        let id = parse_usize(next("boundary id")?)? as u32;
        if cell >= nc || face >= 2 * dim {
            return Err(Error::MeshFormat("boundary face out of range".to_string()));
        }
        boundary_faces.push(BoundaryFace { cell, face, id });
    }
    Ok(LevelMesh::from_parts(dim, 0, coords, cells, boundary_faces, false))
}

/// Split every cell of `mesh` into 2^d children.
///
/// New vertices are arithmetic means of the corner vertices of the entity
/// that generates them (edge midpoints, face centers, cell centers); new
/// vertices on boundary faces attached to the geometry descriptor are then
/// snapped onto the exact curved boundary.
pub fn refine_uniform(mesh: &LevelMesh, geom: &GeometryDescriptor) -> Result<LevelMesh> {
    let dim = mesh.dim;
    let nv_cell = 1usize << dim;
    let n_old_verts = mesh.n_vertices();
    let mut coords = mesh.coords.clone();
    // Key: sorted generating-vertex ids of the entity that owns the new vertex.
    let mut entity_map: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let n_lattice = 3usize.pow(dim as u32);
    let mut cells = Vec::with_capacity(mesh.n_cells() * nv_cell * nv_cell);
    let mut lattice = vec![0usize; n_lattice];

    for c in 0..mesh.n_cells() {
        let verts = mesh.cell_vertices(c);
        // Resolve every point of the 3^d refinement lattice to a global
        // vertex index, creating entity vertices on first touch.
        for p in 0..n_lattice {
            let mut digits = [0usize; 3];
            let mut q = p;
            for item in digits.iter_mut().take(dim) {
                *item = q % 3;
                q /= 3;
            }
            // Corners of the generating entity: replace odd digits by 0/2.
            let odd_axes: Vec<usize> = (0..dim).filter(|&d| digits[d] == 1).collect();
            if odd_axes.is_empty() {
                // Lattice point is an original corner.
                let mut local = 0usize;
                for d in 0..dim {
                    local |= (digits[d] / 2) << d;
                }
                lattice[p] = verts[local];
                continue;
            }
            let mut gen: Vec<usize> = Vec::with_capacity(1 << odd_axes.len());
            for combo in 0..(1usize << odd_axes.len()) {
                let mut local = 0usize;
                for d in 0..dim {
                    let digit = if let Some(k) = odd_axes.iter().position(|&a| a == d) {
                        ((combo >> k) & 1) * 2
                    } else {
                        digits[d]
                    };
                    local |= (digit / 2) << d;
                }
                gen.push(verts[local]);
            }
            gen.sort_unstable();
            let idx = *entity_map.entry(gen.clone()).or_insert_with(|| {
                let mut p_new = [0.0f64; 3];
                for &g in &gen {
                    for k in 0..3 {
                        p_new[k] += coords[g][k];
                    }
                }
                let inv = 1.0 / gen.len() as f64;
                for item in p_new.iter_mut() {
                    *item *= inv;
                }
                coords.push(p_new);
                coords.len() - 1
            });
            lattice[p] = idx;
        }
        // Emit the 2^d children in lexicographic offset order.
        for child in 0..nv_cell {
            for corner in 0..nv_cell {
                let mut p = 0usize;
                let mut stride = 1usize;
                for d in 0..dim {
                    let digit = ((child >> d) & 1) + ((corner >> d) & 1);
                    p += digit * stride;
                    stride *= 3;
                }
                cells.push(lattice[p]);
            }
        }
    }

    // Child boundary faces inherit the parent boundary id.
    let mut boundary_faces = Vec::with_capacity(mesh.boundary_faces.len() * (nv_cell / 2));
    for bf in &mesh.boundary_faces {
        let axis = bf.face / 2;
        let side = bf.face % 2;
        for child in 0..nv_cell {
            if (child >> axis) & 1 == side {
                boundary_faces.push(BoundaryFace {
                    cell: (bf.cell << dim) + child,
                    face: bf.face,
                    id: bf.id,
                });
            }
        }
    }

    // Snap new vertices on curved boundary faces.
    if let Some(curved_id) = geom.boundary_id() {
        let fine_cells_stride = nv_cell;
        for bf in &boundary_faces {
            if bf.id != curved_id {
                continue;
            }
            let cverts = &cells[bf.cell * fine_cells_stride..(bf.cell + 1) * fine_cells_stride];
            for &corner in &face_corners(dim, bf.face) {
                let v = cverts[corner];
                if v >= n_old_verts {
                    coords[v] = geom.snap_point(coords[v]);
                }
            }
        }
    }

    let fine = LevelMesh::from_parts(
        dim,
        mesh.level + 1,
        coords,
        cells,
        boundary_faces,
        true,
    );
    fine.validate()?;
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::SplitMix64;

    #[test]
    fn unit_square_one_refinement() {
        let h = make_unit_hypercube(2, 1);
        assert_eq!(h.levels[0].n_cells(), 1);
        assert_eq!(h.levels[1].n_cells(), 4);
        assert_eq!(h.levels[1].n_vertices(), 9);
        assert!((h.levels[1].h_max - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unit_cube_one_refinement() {
        let h = make_unit_hypercube(3, 1);
        assert_eq!(h.levels[0].n_cells(), 1);
        assert_eq!(h.levels[1].n_cells(), 8);
        assert_eq!(h.levels[1].n_vertices(), 27);
    }

    #[test]
    fn unit_square_two_refinements_counts() {
        // Grid points (2^2+1)^2 = 25, cells 16.
        let h = make_unit_hypercube(2, 2);
        assert_eq!(h.finest().n_cells(), 16);
        assert_eq!(h.finest().n_vertices(), 25);
    }

    #[test]
    fn parent_child_links() {
        let h = make_unit_hypercube(2, 2);
        let mid = &h.levels[1];
        assert_eq!(mid.parent_of(3), Some(0));
        assert_eq!(mid.children_of(2), 8..12);
        assert_eq!(h.levels[0].parent_of(0), None);
    }

    #[test]
    fn flat_refinement_midpoints() {
        let h = make_unit_hypercube(2, 1);
        let fine = &h.levels[1];
        // All fine vertices lie on the half-integer grid.
        for p in &fine.coords {
            for d in 0..2 {
                let t = p[d] * 2.0;
                assert!((t - t.round()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cell_mapping_axis_aligned_square() {
        let h = make_unit_hypercube(2, 1);
        let fine = &h.levels[1];
        let m = fine
            .cell_mapping(0, &[[0.5, 0.5, 0.0]])
            .unwrap();
        let mp = m[0];
        assert!((mp.jacobian[0] - 0.5).abs() < 1e-15);
        assert!((mp.jacobian[4] - 0.5).abs() < 1e-15);
        assert!(mp.jacobian[1].abs() < 1e-15);
        assert!((mp.det - 0.25).abs() < 1e-15);
        // Inverse-transpose of h*I is I/h.
        assert!((mp.inv_transpose[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cell_mapping_identity_on_unit_cell() {
        let h = make_unit_hypercube(2, 0);
        let pts = [[0.3, 0.8, 0.0], [0.0, 0.0, 0.0], [1.0, 1.0, 0.0]];
        let m = h.levels[0].cell_mapping(0, &pts).unwrap();
        for (mp, p) in m.iter().zip(&pts) {
            assert!((mp.point[0] - p[0]).abs() < 1e-15);
            assert!((mp.point[1] - p[1]).abs() < 1e-15);
            assert!((mp.det - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cell_mapping_non_affine_quad() {
        // Vertices (0,0),(1,0),(0,2),(1,1) in lexicographic corner order
        // ((0,0),(1,0),(0,1),(1,1) reference): the bilinear map is
        // T(x,y) = (x, 2y - x y + ... ) computed by hand below.
        // T = v00 (1-x)(1-y) + v10 x(1-y) + v01 (1-x) y + v11 x y
        //   = (x, 2(1-x)y + x y) = (x, 2y - x y).
        // dT2/dx = -y, dT2/dy = 2 - x. At (1,1): J = [[1,0],[-1,1]].
        let coords = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [1.0, 1.0, 0.0],
        ];
        let mesh = LevelMesh::from_parts(2, 0, coords, vec![0, 1, 2, 3], Vec::new(), false);
        let m = mesh.cell_mapping(0, &[[1.0, 1.0, 0.0]]).unwrap();
        let j = m[0].jacobian;
        assert!((j[0] - 1.0).abs() < 1e-15); // dx/dxi
        assert!(j[1].abs() < 1e-15); // dx/deta
        assert!((j[3] + 1.0).abs() < 1e-15); // dy/dxi = -eta = -1
        assert!((j[4] - 1.0).abs() < 1e-15); // dy/deta = 2 - xi = 1
        assert!((m[0].det - 1.0).abs() < 1e-15);
        assert!((m[0].point[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_geometry_detected() {
        // Inverted quad (swapped corners) has negative determinant.
        let coords = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
        ];
        let mesh = LevelMesh::from_parts(2, 0, coords, vec![1, 0, 3, 2], Vec::new(), false);
        assert!(matches!(
            mesh.cell_mapping(0, &[[0.5, 0.5, 0.0]]),
            Err(Error::InvalidGeometry { .. })
        ));
    }

    #[test]
    fn hierarchy_nestedness_flat() {
        // Children tile the parent: map child quadrature points through both
        // maps and compare.
        let mut h = make_unit_hypercube(2, 1);
        h.refine().unwrap();
        let coarse = &h.levels[1];
        let fine = &h.levels[2];
        let mut rng = SplitMix64::new(9);
        for c in 0..coarse.n_cells() {
            for child in coarse.children_of(c) {
                let off = child - (c << 2);
                for _ in 0..4 {
                    let xi = [rng.next_f64(), rng.next_f64(), 0.0];
                    let fine_pt = fine.cell_mapping(child, &[xi]).unwrap()[0].point;
                    let parent_xi = [
                        0.5 * (((off >> 0) & 1) as f64 + xi[0]),
                        0.5 * (((off >> 1) & 1) as f64 + xi[1]),
                        0.0,
                    ];
                    let coarse_pt = coarse.cell_mapping(c, &[parent_xi]).unwrap()[0].point;
                    for k in 0..2 {
                        assert!((fine_pt[k] - coarse_pt[k]).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn channel_mesh_loads_and_is_valid() {
        let h = make_channel_with_cylinder();
        let mesh = h.finest();
        // Pinned by the shipped data file.
        assert_eq!(mesh.n_cells(), 24);
        assert_eq!(mesh.n_vertices(), 40);
        mesh.validate().unwrap();
        // Cylinder-boundary vertices at distance 0.05 from (0.2, 0.2).
        let mut n_cyl_verts = 0;
        for bf in &mesh.boundary_faces {
            if bf.id != channel_ids::CYLINDER {
                continue;
            }
            for &corner in &face_corners(2, bf.face) {
                let v = mesh.cell_vertices(bf.cell)[corner];
                let p = mesh.coords[v];
                let r = ((p[0] - 0.2).powi(2) + (p[1] - 0.2).powi(2)).sqrt();
                assert!((r - 0.05).abs() <= 1e-12 * 0.05);
                n_cyl_verts += 1;
            }
        }
        assert!(n_cyl_verts > 0);
    }

    #[test]
    fn channel_refinement_keeps_cylinder_snapped() {
        let mut h = make_channel_with_cylinder();
        h.refine().unwrap();
        h.refine().unwrap();
        let mesh = h.finest();
        for bf in &mesh.boundary_faces {
            if bf.id != channel_ids::CYLINDER {
                continue;
            }
            for &corner in &face_corners(2, bf.face) {
                let v = mesh.cell_vertices(bf.cell)[corner];
                let p = mesh.coords[v];
                let r = ((p[0] - 0.2).powi(2) + (p[1] - 0.2).powi(2)).sqrt();
                assert!((r - 0.05).abs() <= 1e-12 * 0.05, "r = {r}");
            }
        }
        mesh.validate().unwrap();
    }

    #[test]
    fn snapping_is_idempotent() {
        let geom = channel_cylinder_geometry();
        let p = geom.snap_point([0.2413, 0.1871, 0.0]);
        let q = geom.snap_point(p);
        let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        assert!(d <= 1e-15 * 0.05);
    }

    #[test]
    fn boundary_faces_propagate() {
        let h = make_unit_hypercube(2, 1);
        let fine = &h.levels[1];
        // 4 coarse boundary edges, each with 2 children.
        assert_eq!(fine.boundary_faces.len(), 8);
        // All cells adjacent to y=0 have face 2 tagged with id 2.
        let lows: Vec<_> = fine
            .boundary_faces
            .iter()
            .filter(|bf| bf.id == 2)
            .collect();
        assert_eq!(lows.len(), 2);
        for bf in lows {
            assert_eq!(bf.face, 2);
        }
    }

    #[test]
    fn mesh_parser_rejects_garbage() {
        assert!(parse_mesh_text("dim 4").is_err());
        assert!(parse_mesh_text("dim 2\nvertices 1\n0 0\ncells 1\n0 0 0 5\nboundary 0").is_err());
        assert!(parse_mesh_text("").is_err());
    }
}
