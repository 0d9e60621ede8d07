use stokes_mg::fespace::{build_dofmap, mark_dirichlet};
use stokes_mg::verify::check_infsup;
use stokes_mg_cli::benchmarks::define_benchmark;

#[test]
fn probe_infsup_levels() {
    for (name, levels) in [("cavity2d", 4usize), ("turek", 3)] {
        let p = define_benchmark(name, None).unwrap();
        let meshes = p.build_meshes(levels).unwrap();
        let lo = if name == "cavity2d" { 1 } else { 0 };
        for l in lo..levels {
            let mesh = &meshes.levels[l];
            let mut dm = build_dofmap(mesh, 2).unwrap();
            mark_dirichlet(&mut dm, mesh, &p.dirichlet_ids);
            let rep = check_infsup(mesh, &dm).unwrap();
            println!(
                "{name} level {l} dofs {}: lbb {:.5} bp {:.5} bp_min {:.6}",
                dm.n_total(), rep.lbb, rep.bp_global, rep.bp_element_min
            );
        }
    }
}
