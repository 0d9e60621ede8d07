//! Running one benchmark configuration or a configuration sweep, with
//! wall-clock timing per iteration.

use std::sync::Arc;
use std::time::Instant;

use anyhow::Result;
use stokes_mg::fespace::{apply_dirichlet, pressure_mean_project, BlockVector, DofMap};
use stokes_mg::mesh::MeshHierarchy;
use stokes_mg::metrics::RunRecord;
use stokes_mg::mfoperator::ApplyMode;
use stokes_mg::multigrid::{CycleType, Hierarchy, HierarchyParams};
use stokes_mg::smoother::DiagChoice;

use crate::benchmarks::define_benchmark;

/// One benchmark configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub benchmark: String,
    /// Number of hierarchy levels (level 0 is the coarse mesh).
    pub levels: usize,
    pub k_a: usize,
    pub k_s: usize,
    pub m: usize,
    pub cycle: CycleType,
    pub diag: DiagChoice,
    pub dt: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    /// Collect wall-clock timing per iteration.
    pub timed: bool,
}

impl RunConfig {
    pub fn new(benchmark: &str, levels: usize) -> Self {
        RunConfig {
            benchmark: benchmark.to_string(),
            levels,
            k_a: 3,
            k_s: 3,
            m: 3,
            cycle: CycleType::W,
            diag: DiagChoice::Local,
            dt: None,
            tol: 1e-10,
            max_iter: 15,
            timed: true,
        }
    }
}

/// Everything a run produces.
pub struct RunOutput {
    pub record: RunRecord,
    /// Full solution including the imposed boundary values.
    pub solution: BlockVector,
    pub dofmap: Arc<DofMap>,
    pub meshes: MeshHierarchy,
}

/// Build the hierarchy, run the solve and collect the record.
///
/// Non-convergence is reported through the record status, not as an error.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let problem = define_benchmark(&cfg.benchmark, cfg.dt)?;
    let meshes = problem.build_meshes(cfg.levels)?;
    let params = HierarchyParams {
        degree: 2,
        mu: problem.mu,
        gamma_rho: problem.gamma_rho,
        dirichlet_ids: problem.dirichlet_ids.clone(),
        pressure_mean: problem.pressure_mean,
        k_a: cfg.k_a,
        k_s: cfg.k_s,
        m_smooth: cfg.m,
        cycle: cfg.cycle,
        diag_choice: cfg.diag,
    };
    let hier = Hierarchy::build(&meshes, &params)?;
    let level = hier.finest();
    let dm = hier.dofmaps[level].clone();
    let op = &hier.operators[level];

    // Dirichlet data, load vector and homogenization: solve K x~ = b with
    // x = x~ + x_D and b = f - K_raw x_D restricted to the active rows.
    let mut x_d = BlockVector::zeros(&dm);
    apply_dirichlet(&dm, &*problem.bc, &mut x_d);
    let mut b = match &problem.force {
        Some(f) => op.assemble_load(&**f),
        None => BlockVector::zeros(&dm),
    };
    let kx_d = op.apply_k(&x_d, ApplyMode::Raw)?;
    b.axpy(-1.0, &kx_d);
    dm.zero_constrained(&mut b.u);
    if problem.pressure_mean {
        pressure_mean_project(&dm, &mut b.p);
    }

    // Solve with per-iteration timing.
    let mut iter_times: Vec<f64> = Vec::new();
    let mut last = Instant::now();
    let result = hier.solve_observed(&b, cfg.tol, cfg.max_iter, &mut |_, _| {
        let now = Instant::now();
        iter_times.push(now.duration_since(last).as_secs_f64());
        last = now;
    });
    let time_per_iter = if cfg.timed && !iter_times.is_empty() {
        let mut ts = iter_times.clone();
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(ts[ts.len() / 2])
    } else {
        None
    };

    let mut solution = result.x.clone();
    solution.axpy(1.0, &x_d);
    let record = RunRecord {
        benchmark: cfg.benchmark.clone(),
        levels: cfg.levels,
        k_a: cfg.k_a,
        k_s: cfg.k_s,
        m: cfg.m,
        cycle: cfg.cycle,
        diag: cfg.diag,
        dt: cfg.dt,
        dofs: dm.n_total(),
        residual_history: result.residuals,
        time_per_iter,
        status: result.status,
    };
    Ok(RunOutput {
        record,
        solution,
        dofmap: dm,
        meshes,
    })
}

/// Grid sweep over Chebyshev degrees and smoothing steps.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub deg_max: usize,
    pub m_max: usize,
    /// Run configurations on worker threads; disables timing collection.
    pub parallel: bool,
}

/// Run the full (k_A, k_S, m) grid and return the records in deterministic
/// (k_A, k_S, m) order.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<RunRecord>> {
    let mut configs = Vec::new();
    for ka in 0..=cfg.deg_max {
        for ks in 0..=cfg.deg_max {
            for m in 1..=cfg.m_max {
                let mut c = cfg.base.clone();
                c.k_a = ka;
                c.k_s = ks;
                c.m = m;
                if cfg.parallel {
                    c.timed = false; // timings are only meaningful serially
                }
                configs.push(c);
            }
        }
    }
    if !cfg.parallel {
        return configs.iter().map(|c| Ok(run(c)?.record)).collect();
    }
    let n_workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(configs.len().max(1));
    let results: Vec<Result<RunRecord>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk in configs.chunks(configs.len().div_ceil(n_workers)) {
            handles.push(scope.spawn(move || {
                chunk
                    .iter()
                    .map(|c| Ok(run(c)?.record))
                    .collect::<Vec<Result<RunRecord>>>()
            }));
        }
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use stokes_mg::multigrid::SolveStatus;

    #[test]
    fn cavity_run_converges() {
        let mut cfg = RunConfig::new("cavity2d", 3);
        cfg.k_a = 2;
        cfg.k_s = 2;
        cfg.m = 2;
        cfg.timed = false;
        let out = run(&cfg).unwrap();
        assert_eq!(out.record.status, SolveStatus::Converged);
        assert!(out.record.q().unwrap() < 1.0);
        // Lid value imposed on the full solution.
        let dm = &out.dofmap;
        let lid_node = (0..dm.n_scalar_v)
            .find(|&n| {
                let p = dm.node_coords_v[n];
                (p[1] - 1.0).abs() < 1e-12 && (p[0] - 0.5).abs() < 0.3
            })
            .unwrap();
        assert_eq!(out.solution.u[lid_node * 2], 1.0);
    }

    #[test]
    fn reproducible_residual_histories() {
        let mut cfg = RunConfig::new("cavity2d", 2);
        cfg.k_a = 1;
        cfg.k_s = 1;
        cfg.m = 1;
        cfg.timed = false;
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.record.residual_history, b.record.residual_history);
    }

    #[test]
    fn tiny_sweep_shape() {
        let mut base = RunConfig::new("cavity2d", 2);
        base.timed = false;
        let records = sweep(&SweepConfig {
            base,
            deg_max: 1,
            m_max: 2,
            parallel: false,
        })
        .unwrap();
        assert_eq!(records.len(), 2 * 2 * 2);
        assert!(records.iter().all(|r| r.dofs == 187));
    }
}
