use stokes_mg::fespace::{build_dofmap, mark_dirichlet};
use stokes_mg::verify::check_bp_global_sparse;
use stokes_mg_cli::benchmarks::define_benchmark;

#[test]
fn probe_turek_bp_level3() {
    let p = define_benchmark("turek", None).unwrap();
    let meshes = p.build_meshes(4).unwrap();
    for l in [1usize, 2, 3] {
        let mesh = &meshes.levels[l];
        let mut dm = build_dofmap(mesh, 2).unwrap();
        mark_dirichlet(&mut dm, mesh, &p.dirichlet_ids);
        let t0 = std::time::Instant::now();
        let bp = check_bp_global_sparse(mesh, &dm).unwrap();
        println!("turek level {l} dofs {}: bp {bp:.5} ({:.1} s)", dm.n_total(), t0.elapsed().as_secs_f64());
    }
}
