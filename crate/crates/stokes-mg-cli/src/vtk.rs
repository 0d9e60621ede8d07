//! Legacy ASCII VTK output of solution fields (point-data velocity vector
//! and pressure scalar on the mesh vertices).

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use stokes_mg::fespace::{BlockVector, DofMap};
use stokes_mg::mesh::LevelMesh;

/// Scalar dof index at each mesh vertex for one field (velocity: pressure
/// = false), resolved through the corner nodes of each cell.
fn vertex_scalar_dofs(mesh: &LevelMesh, dofmap: &DofMap, pressure: bool) -> Vec<usize> {
    let dim = mesh.dim;
    let deg = if pressure {
        dofmap.degree - 1
    } else {
        dofmap.degree
    };
    let n1 = deg + 1;
    let mut map = vec![usize::MAX; mesh.n_vertices()];
    for cell in 0..mesh.n_cells() {
        let verts = mesh.cell_vertices(cell);
        let dofs = if pressure {
            dofmap.cell_dofs_p(cell)
        } else {
            dofmap.cell_dofs_v(cell)
        };
        for (corner, &vert) in verts.iter().enumerate() {
            // Local tensor index of the corner.
            let mut local = 0usize;
            let mut stride = 1usize;
            for d in 0..dim {
                if (corner >> d) & 1 == 1 {
                    local += deg * stride;
                }
                stride *= n1;
            }
            map[vert] = dofs[local];
        }
    }
    map
}

/// Write the solution as a legacy ASCII VTK unstructured grid.
pub fn write_fields(
    mesh: &LevelMesh,
    dofmap: &DofMap,
    solution: &BlockVector,
    path: &Path,
) -> Result<()> {
    let dim = mesh.dim;
    let n_pts = mesh.n_vertices();
    let n_cells = mesh.n_cells();
    let v_dofs = vertex_scalar_dofs(mesh, dofmap, false);
    let p_dofs = vertex_scalar_dofs(mesh, dofmap, true);

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("stokes solution fields\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET UNSTRUCTURED_GRID\n");
    out.push_str(&format!("POINTS {n_pts} double\n"));
    for p in &mesh.coords {
        out.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
    }
    let verts_per_cell = 1 << dim;
    out.push_str(&format!(
        "CELLS {n_cells} {}\n",
        n_cells * (verts_per_cell + 1)
    ));
    for cell in 0..n_cells {
        let v = mesh.cell_vertices(cell);
        // VTK corner orderings from the lexicographic layout.
        match dim {
            2 => out.push_str(&format!("4 {} {} {} {}\n", v[0], v[1], v[3], v[2])),
            3 => out.push_str(&format!(
                "8 {} {} {} {} {} {} {} {}\n",
                v[0], v[1], v[3], v[2], v[4], v[5], v[7], v[6]
            )),
            _ => unreachable!(),
        }
    }
    out.push_str(&format!("CELL_TYPES {n_cells}\n"));
    let cell_type = if dim == 2 { 9 } else { 12 }; // quad / hexahedron
    for _ in 0..n_cells {
        out.push_str(&format!("{cell_type}\n"));
    }
    out.push_str(&format!("POINT_DATA {n_pts}\n"));
    out.push_str("VECTORS velocity double\n");
    for &dof in &v_dofs {
        let mut comps = [0.0f64; 3];
        for c in 0..dim {
            comps[c] = solution.u[dof * dim + c];
        }
        out.push_str(&format!("{} {} {}\n", comps[0], comps[1], comps[2]));
    }
    out.push_str("SCALARS pressure double 1\n");
    out.push_str("LOOKUP_TABLE default\n");
    for &dof in &p_dofs {
        out.push_str(&format!("{}\n", solution.p[dof]));
    }

    let mut file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::{run, RunConfig};

    #[test]
    fn vtk_file_structure_and_boundary_values() {
        let mut cfg = RunConfig::new("cavity2d", 2);
        cfg.k_a = 1;
        cfg.k_s = 1;
        cfg.m = 2;
        cfg.timed = false;
        let out = run(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cavity.vtk");
        let mesh = out.meshes.finest();
        write_fields(mesh, &out.dofmap, &out.solution, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // Structural parse: counts match the dofmap/mesh.
        assert!(text.starts_with("# vtk DataFile Version 3.0"));
        assert!(text.contains(&format!("POINTS {} double", mesh.n_vertices())));
        assert!(text.contains(&format!("CELL_TYPES {}", mesh.n_cells())));
        let velocity_lines: Vec<&str> = text
            .split("VECTORS velocity double\n")
            .nth(1)
            .unwrap()
            .lines()
            .take(mesh.n_vertices())
            .collect();
        assert_eq!(velocity_lines.len(), mesh.n_vertices());
        // A vertex on the lid (y = 1) carries velocity (1, 0, 0).
        let lid_vertex = (0..mesh.n_vertices())
            .find(|&v| (mesh.coords[v][1] - 1.0).abs() < 1e-12 && mesh.coords[v][0] > 0.2 && mesh.coords[v][0] < 0.8)
            .unwrap();
        let comps: Vec<f64> = velocity_lines[lid_vertex]
            .split_whitespace()
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(comps[0], 1.0);
        assert_eq!(comps[1], 0.0);
    }
}
