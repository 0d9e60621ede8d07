use stokes_mg::multigrid::{CycleType, Hierarchy, HierarchyParams};
use stokes_mg::smoother::DiagChoice;
use stokes_mg::verify;
use stokes_mg_cli::benchmarks::define_benchmark;

fn fit_slope(ms: &[usize], norms: &[f64]) -> f64 {
    let n = ms.len() as f64;
    let xs: Vec<f64> = ms.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|&v| v.ln()).collect();
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[test]
fn probe_smoothing_slopes() {
    let problem = define_benchmark("cavity2d", None).unwrap();
    let meshes = problem.build_meshes(4).unwrap();
    for (ka, ks) in [(0usize, 0usize)] {
        let params = HierarchyParams {
            degree: 2, mu: 1.0, gamma_rho: 0.0,
            dirichlet_ids: problem.dirichlet_ids.clone(), pressure_mean: true,
            k_a: ka, k_s: ks, m_smooth: 1, cycle: CycleType::W, diag_choice: DiagChoice::Local,
        };
        let hier = Hierarchy::build(&meshes, &params).unwrap();
        let l = hier.finest();
        let sys = verify::assemble(&meshes.levels[l], hier.dofmaps[l].clone(), 1.0, 0.0).unwrap();
        let ms = [2usize, 4, 8, 16, 32];
        let rep = verify::measure_smoothing_property(&sys, hier.smoother(l).unwrap(), &ms).unwrap();
        let norms: Vec<f64> = rep.rows.iter().map(|r| r.norm_ksm).collect();
        let slope = fit_slope(&ms, &norms);
        println!("k=({ka},{ks}): norms {norms:?} slope {slope:.4}");
    }
}
