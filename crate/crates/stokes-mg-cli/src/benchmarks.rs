//! The five benchmark problems: domain, boundary conditions, parameters
//! and right-hand side.

use std::sync::Arc;

use anyhow::{bail, Result};
use stokes_mg::mesh::{channel_ids, make_channel_with_cylinder, make_unit_hypercube, MeshHierarchy};

/// Boundary-value function: physical point and boundary id to velocity.
pub type BcFn = Arc<dyn Fn([f64; 3], u32) -> [f64; 3] + Send + Sync>;
/// Body force as a function of the physical point.
pub type ForceFn = Arc<dyn Fn([f64; 3]) -> [f64; 3] + Send + Sync>;

/// A fully specified benchmark problem.
pub struct Problem {
    pub name: String,
    pub dim: usize,
    pub mu: f64,
    pub gamma_rho: f64,
    pub pressure_mean: bool,
    /// Dirichlet ids in priority order; the moving lid comes last so it
    /// wins the closed top edge at the corners.
    pub dirichlet_ids: Vec<u32>,
    pub bc: BcFn,
    pub force: Option<ForceFn>,
    pub dt: Option<f64>,
}

impl Problem {
    /// Nested mesh hierarchy with `levels` levels (>= 1). Unit domains
    /// start from the 2^d-cell mesh (the single-cell coarse level is
    /// pressure-deficient); the channel starts from the shipped coarse
    /// mesh. Level `levels-1` is the finest.
    pub fn build_meshes(&self, levels: usize) -> Result<MeshHierarchy> {
        anyhow::ensure!(levels >= 1, "need at least one level");
        let meshes = match self.name.as_str() {
            "turek" => {
                let mut h = make_channel_with_cylinder();
                for _ in 0..levels - 1 {
                    h.refine()?;
                }
                h
            }
            _ => {
                let mut h = make_unit_hypercube(self.dim, levels);
                h.drop_coarsest(1);
                h
            }
        };
        Ok(meshes)
    }
}

/// Names of all shipped benchmarks.
pub const BENCHMARK_NAMES: [&str; 5] = ["laser", "cavity2d", "cavity3d", "turek", "cavity2d-dt"];

/// Resolve a benchmark name to its problem data. `dt` is only meaningful
/// for `cavity2d-dt` (defaults to 1 there) and ignored otherwise.
pub fn define_benchmark(name: &str, dt: Option<f64>) -> Result<Problem> {
    let zero_bc: BcFn = Arc::new(|_, _| [0.0; 3]);
    match name {
        "laser" => {
            let c1 = 0.001;
            let c2 = 100.0;
            let x0 = [0.75, 0.75];
            Ok(Problem {
                name: name.to_string(),
                dim: 2,
                mu: 0.0022,
                gamma_rho: 0.0,
                pressure_mean: true,
                dirichlet_ids: vec![0, 1, 2, 3],
                bc: zero_bc,
                force: Some(Arc::new(move |x| {
                    let dx = x[0] - x0[0];
                    let dy = x[1] - x0[1];
                    [0.0, c1 * (-c2 * (dx * dx + dy * dy)).exp(), 0.0]
                })),
                dt: None,
            })
        }
        "cavity2d" | "cavity2d-dt" => {
            let is_dt = name == "cavity2d-dt";
            let dt_val = if is_dt { Some(dt.unwrap_or(1.0)) } else { None };
            Ok(Problem {
                name: name.to_string(),
                dim: 2,
                mu: 1.0,
                gamma_rho: dt_val.map(|d| 1.0 / d).unwrap_or(0.0),
                pressure_mean: true,
                // Lid (y = 1, id 3) last: it wins the two top corners.
                dirichlet_ids: vec![0, 1, 2, 3],
                bc: Arc::new(|_, id| if id == 3 { [1.0, 0.0, 0.0] } else { [0.0; 3] }),
                force: None,
                dt: dt_val,
            })
        }
        "cavity3d" => Ok(Problem {
            name: name.to_string(),
            dim: 3,
            mu: 1.0,
            gamma_rho: 0.0,
            pressure_mean: true,
            // Lid (z = 1, id 5) last.
            dirichlet_ids: vec![0, 1, 2, 3, 4, 5],
            bc: Arc::new(|_, id| if id == 5 { [1.0, 0.0, 0.0] } else { [0.0; 3] }),
            force: None,
            dt: None,
        }),
        "turek" => {
            let v_max = 1.0;
            Ok(Problem {
                name: name.to_string(),
                dim: 2,
                mu: 1.0,
                gamma_rho: 0.0,
                // Do-nothing outflow makes the pressure unique.
                pressure_mean: false,
                dirichlet_ids: vec![
                    channel_ids::WALL,
                    channel_ids::CYLINDER,
                    channel_ids::INFLOW,
                ],
                bc: Arc::new(move |x, id| {
                    if id == channel_ids::INFLOW {
                        let y = x[1];
                        [4.0 * v_max * y * (0.41 - y) / (0.41 * 0.41), 0.0, 0.0]
                    } else {
                        [0.0; 3]
                    }
                }),
                force: None,
                dt: None,
            })
        }
        other => bail!("unknown benchmark '{other}' (expected one of {BENCHMARK_NAMES:?})"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laser_force_peak() {
        let p = define_benchmark("laser", None).unwrap();
        let f = p.force.as_ref().unwrap();
        let at_peak = f([0.75, 0.75, 0.0]);
        assert_eq!(at_peak, [0.0, 0.001, 0.0]);
        let off = f([0.65, 0.75, 0.0]);
        assert!((off[1] - 0.001 * (-1.0f64).exp()).abs() < 1e-18);
    }

    #[test]
    fn turek_inflow_profile() {
        let p = define_benchmark("turek", None).unwrap();
        let v = (p.bc)([0.0, 0.205, 0.0], channel_ids::INFLOW);
        assert!((v[0] - 1.0).abs() < 1e-14);
        assert_eq!(v[1], 0.0);
        let w = (p.bc)([0.5, 0.0, 0.0], channel_ids::WALL);
        assert_eq!(w, [0.0; 3]);
    }

    #[test]
    fn dt_controls_reaction() {
        let p = define_benchmark("cavity2d-dt", Some(0.01)).unwrap();
        assert!((p.gamma_rho - 100.0).abs() < 1e-12);
        let p1 = define_benchmark("cavity2d-dt", None).unwrap();
        assert_eq!(p1.gamma_rho, 1.0);
        let ps = define_benchmark("cavity2d", Some(0.01)).unwrap();
        assert_eq!(ps.gamma_rho, 0.0);
    }

    #[test]
    fn unknown_name_rejected() {
        assert!(define_benchmark("bogus", None).is_err());
    }

    #[test]
    fn mesh_levels_counts() {
        let p = define_benchmark("cavity2d", None).unwrap();
        let meshes = p.build_meshes(3).unwrap();
        assert_eq!(meshes.n_levels(), 3);
        assert_eq!(meshes.levels[0].n_cells(), 4);
        assert_eq!(meshes.finest().n_cells(), 64);
        let t = define_benchmark("turek", None).unwrap();
        let tm = t.build_meshes(2).unwrap();
        assert_eq!(tm.levels[0].n_cells(), 24);
        assert_eq!(tm.finest().n_cells(), 96);
    }
}
