//! Desk-scale verification reports as CSV (one row per level or
//! configuration): assembled-oracle agreement, smoother scaling
//! inequalities, inf-sup constants, smoothing and approximation
//! measurements.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use stokes_mg::fespace::BlockVector;
use stokes_mg::mfoperator::ApplyMode;
use stokes_mg::multigrid::{Hierarchy, HierarchyParams};
use stokes_mg::smoother::DiagChoice;
use stokes_mg::util::{max_abs, max_abs_diff, SplitMix64};
use stokes_mg::verify;

use crate::benchmarks::define_benchmark;

/// Verification driver configuration.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub benchmark: String,
    pub levels: usize,
    pub k_a: usize,
    pub k_s: usize,
    pub diag: DiagChoice,
    pub dt: Option<f64>,
}

/// The verification CSV tables.
pub struct VerifyReport {
    pub oracle_csv: String,
    pub spectral_csv: String,
    pub infsup_csv: String,
    pub smoothing_csv: String,
    pub approximation_csv: String,
}

/// Sizes beyond which the dense checks are skipped per level.
const DENSE_LEVEL_CAP: usize = 3_000;

/// Run the desk-scale verification suite for one benchmark.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
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
        m_smooth: 1,
        cycle: stokes_mg::multigrid::CycleType::W,
        diag_choice: cfg.diag,
    };
    let hier = Hierarchy::build(&meshes, &params)?;

    let mut oracle_csv = String::from("level,dofs,max_rel_err_K,max_rel_err_Mp\n");
    let mut spectral_csv =
        String::from("level,dofs,lambda_min_a_gap,lambda_max_a,lambda_min_s_gap,lambda_max_s,pass\n");
    let mut infsup_csv = String::from("level,dofs,lbb,bp_global,bp_element_min\n");
    let mut smoothing_csv = String::from("level,m,norm_ksm,eta_ratio,norm_khat_minus_k\n");
    let mut approximation_csv = String::from("fine_level,dofs,norm\n");

    let mut rng = SplitMix64::new(0xbead);
    for l in 0..hier.n_levels() {
        let dm = &hier.dofmaps[l];
        let dofs = dm.n_total();
        if dofs > verify::ASSEMBLY_GUARD {
            continue;
        }
        let sys = verify::assemble(
            &meshes.levels[l],
            dm.clone(),
            problem.mu,
            problem.gamma_rho,
        )?;
        // Oracle agreement of the matrix-free path.
        let mut err_k = 0.0f64;
        let mut err_mp = 0.0f64;
        for _ in 0..3 {
            let mut x = BlockVector::zeros(dm);
            rng.fill_sym(&mut x.u);
            rng.fill_sym(&mut x.p);
            let mf = hier.operators[l].apply_k(&x, ApplyMode::Residual)?;
            let mut au = vec![0.0; dm.n_velocity()];
            sys.apply_a_mode(&x.u, &mut au, ApplyMode::Residual);
            let mut btp = vec![0.0; dm.n_velocity()];
            sys.apply_bt_mode(&x.p, &mut btp, ApplyMode::Residual);
            for i in 0..au.len() {
                au[i] += btp[i];
            }
            let mut bu = vec![0.0; dm.n_pressure()];
            sys.apply_b_mode(&x.u, &mut bu, ApplyMode::Residual);
            err_k = err_k
                .max(max_abs_diff(&mf.u, &au) / max_abs(&au).max(1.0))
                .max(max_abs_diff(&mf.p, &bu) / max_abs(&bu).max(1.0));
            let mut mp_mf = vec![0.0; dm.n_pressure()];
            hier.operators[l].apply_mp(&x.p, &mut mp_mf)?;
            let mut mp_as = vec![0.0; dm.n_pressure()];
            sys.m_p.matvec(&x.p, &mut mp_as);
            err_mp = err_mp.max(max_abs_diff(&mp_mf, &mp_as) / max_abs(&mp_as).max(1.0));
        }
        writeln!(oracle_csv, "{l},{dofs},{err_k:.3e},{err_mp:.3e}").unwrap();

        if dofs <= DENSE_LEVEL_CAP {
            if let Some(sm) = hier.smoother(l) {
                let rep = verify::check_spectral_inequalities(&sys, sm)?;
                writeln!(
                    spectral_csv,
                    "{l},{dofs},{:.6e},{:.6e},{:.6e},{:.6e},{}",
                    rep.lambda_min_a_gap,
                    rep.lambda_max_a,
                    rep.lambda_min_s_gap,
                    rep.lambda_max_s,
                    rep.passes(1e-8)
                )
                .unwrap();
            }
            let infsup = verify::check_infsup(&meshes.levels[l], dm)?;
            writeln!(
                infsup_csv,
                "{l},{dofs},{:.6e},{:.6e},{:.6e}",
                infsup.lbb, infsup.bp_global, infsup.bp_element_min
            )
            .unwrap();
        }
    }

    // Smoothing property on the finest level that fits the dense cap.
    if let Some(l) = (1..hier.n_levels())
        .rev()
        .find(|&l| hier.dofmaps[l].n_total() <= DENSE_LEVEL_CAP)
    {
        let dm = &hier.dofmaps[l];
        let sys = verify::assemble(
            &meshes.levels[l],
            dm.clone(),
            problem.mu,
            problem.gamma_rho,
        )?;
        let rep =
            verify::measure_smoothing_property(&sys, hier.smoother(l).unwrap(), &[1, 2, 4, 8])?;
        for row in &rep.rows {
            writeln!(
                smoothing_csv,
                "{l},{},{:.6e},{},{:.6e}",
                row.m,
                row.norm_ksm,
                row.eta_ratio
                    .map(|r| format!("{r:.6}"))
                    .unwrap_or_default(),
                rep.norm_khat_minus_k
            )
            .unwrap();
        }
    }

    // Approximation property on all level pairs that fit.
    let pair_levels: Vec<usize> = (1..hier.n_levels())
        .filter(|&l| hier.dofmaps[l].n_total() <= DENSE_LEVEL_CAP)
        .collect();
    if !pair_levels.is_empty() {
        let rows = verify::measure_approximation_property(&meshes, &hier, &pair_levels)?;
        for row in rows {
            writeln!(
                approximation_csv,
                "{},{},{:.6e}",
                row.fine_level,
                hier.dofmaps[row.fine_level].n_total(),
                row.norm
            )
            .unwrap();
        }
    }

    Ok(VerifyReport {
        oracle_csv,
        spectral_csv,
        infsup_csv,
        smoothing_csv,
        approximation_csv,
    })
}

impl VerifyReport {
    /// Write all tables into a directory.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating directory {}", dir.display()))?;
        std::fs::write(dir.join("verify_oracle.csv"), &self.oracle_csv)?;
        std::fs::write(dir.join("verify_spectral.csv"), &self.spectral_csv)?;
        std::fs::write(dir.join("verify_infsup.csv"), &self.infsup_csv)?;
        std::fs::write(dir.join("verify_smoothing.csv"), &self.smoothing_csv)?;
        std::fs::write(dir.join("verify_approximation.csv"), &self.approximation_csv)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_report_small_cavity() {
        let cfg = VerifyConfig {
            benchmark: "cavity2d".to_string(),
            levels: 2,
            k_a: 1,
            k_s: 1,
            diag: DiagChoice::Local,
            dt: None,
        };
        let rep = run_verify(&cfg).unwrap();
        // Oracle errors at 1e-12 or below on every row.
        for line in rep.oracle_csv.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            let err_k: f64 = cols[2].parse().unwrap();
            assert!(err_k <= 1e-12, "{line}");
        }
        assert!(rep.spectral_csv.lines().skip(1).all(|l| l.ends_with("true")));
        assert!(rep.infsup_csv.lines().count() >= 3);
        assert!(rep.smoothing_csv.lines().count() >= 4);
        assert!(rep.approximation_csv.lines().count() >= 2);
    }
}
