//! Command-line front end: run single benchmark configurations, sweep
//! Chebyshev-degree/smoothing-step grids, and produce verification reports.

use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use stokes_mg::metrics::{aggregate_heatmap, run_csv_row, RUN_CSV_HEADER};
use stokes_mg::multigrid::CycleType;
use stokes_mg::smoother::DiagChoice;
use stokes_mg_cli::config::ConfigFile;
use stokes_mg_cli::report::{run_verify, VerifyConfig};
use stokes_mg_cli::runner::{run, sweep, RunConfig, SweepConfig};
use stokes_mg_cli::vtk::write_fields;

#[derive(Parser)]
#[command(
    name = "stokes-bench",
    about = "Matrix-free monolithic multigrid benchmarks for Stokes problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one benchmark configuration.
    Run(RunArgs),
    /// Run a (k_A, k_S, m) grid and write heatmap tables.
    Sweep(SweepArgs),
    /// Desk-scale verification reports (oracles, inequalities, inf-sup).
    Verify(VerifyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Benchmark: laser | cavity2d | cavity3d | turek | cavity2d-dt.
    #[arg(long)]
    benchmark: Option<String>,
    /// Number of multigrid levels (level 0 is the coarse mesh).
    #[arg(long)]
    levels: Option<usize>,
    /// Chebyshev degree for the velocity block.
    #[arg(long, default_value_t = 3)]
    ka: usize,
    /// Chebyshev degree for the Schur-complement block.
    #[arg(long, default_value_t = 3)]
    ks: usize,
    /// Multigrid cycle: V or W.
    #[arg(long, default_value = "W")]
    cycle: String,
    /// Schur diagonal approximation: exact | d | p | loc.
    #[arg(long, default_value = "loc")]
    diag: String,
    /// Time step for the generalized Stokes benchmark (gamma = 1/dt).
    #[arg(long)]
    dt: Option<f64>,
    /// Output directory for CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Load the configuration from a JSON file instead of flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pre-/post-smoothing steps.
    #[arg(long, default_value_t = 3)]
    steps: usize,
    /// Relative residual reduction target.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Maximum multigrid iterations.
    #[arg(long, default_value_t = 15)]
    max_iter: usize,
    /// Write the solution fields as legacy ASCII VTK to this path.
    #[arg(long)]
    fields: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Largest Chebyshev degree of the grid (degrees 0..=deg-max).
    #[arg(long, default_value_t = 3)]
    deg_max: usize,
    /// Largest smoothing-step count of the grid (m = 1..=m-max).
    #[arg(long, default_value_t = 4)]
    m_max: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 15)]
    max_iter: usize,
    /// Run configurations on worker threads (disables timing collection).
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
}

fn parse_cycle(s: &str) -> Result<CycleType> {
    CycleType::parse(s).ok_or_else(|| anyhow::anyhow!("cycle must be V or W, got '{s}'"))
}

fn parse_diag(s: &str) -> Result<DiagChoice> {
    DiagChoice::parse(s).ok_or_else(|| anyhow::anyhow!("diag must be exact|d|p|loc, got '{s}'"))
}

fn require_benchmark(common: &CommonArgs) -> Result<(String, usize)> {
    let benchmark = common
        .benchmark
        .clone()
        .context("--benchmark is required")?;
    let levels = common.levels.context("--levels is required")?;
    ensure!(levels >= 1, "--levels must be at least 1");
    Ok((benchmark, levels))
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => ConfigFile::load(path)?.to_run_config()?,
        None => {
            let (benchmark, levels) = require_benchmark(&args.common)?;
            RunConfig {
                benchmark,
                levels,
                k_a: args.common.ka,
                k_s: args.common.ks,
                m: args.steps,
                cycle: parse_cycle(&args.common.cycle)?,
                diag: parse_diag(&args.common.diag)?,
                dt: args.common.dt,
                tol: args.tol,
                max_iter: args.max_iter,
                timed: true,
            }
        }
    };
    let out = run(&cfg)?;
    let rec = &out.record;
    println!(
        "{} levels={} dofs={} k=({},{}) m={} cycle={} diag={}: status={} iters={} q={}",
        rec.benchmark,
        rec.levels,
        rec.dofs,
        rec.k_a,
        rec.k_s,
        rec.m,
        rec.cycle.as_str(),
        rec.diag.as_str(),
        rec.effective_status().as_str(),
        rec.residual_history.len() - 1,
        rec.q().map(|q| format!("{q:.4}")).unwrap_or_else(|| "-".into()),
    );
    if let Some(dir) = &args.common.out {
        std::fs::create_dir_all(dir)?;
        let mut csv = String::from(RUN_CSV_HEADER);
        csv.push_str(&run_csv_row(rec));
        std::fs::write(dir.join("run.csv"), csv)?;
        let mut residuals = String::from("iteration,residual\n");
        for (i, r) in rec.residual_history.iter().enumerate() {
            residuals.push_str(&format!("{i},{r:.12e}\n"));
        }
        std::fs::write(dir.join("residuals.csv"), residuals)?;
    }
    if let Some(path) = &args.fields {
        write_fields(out.meshes.finest(), &out.dofmap, &out.solution, path)?;
        println!("fields written to {}", path.display());
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let (benchmark, levels) = require_benchmark(&args.common)?;
    let base = RunConfig {
        benchmark,
        levels,
        k_a: 0,
        k_s: 0,
        m: 1,
        cycle: parse_cycle(&args.common.cycle)?,
        diag: parse_diag(&args.common.diag)?,
        dt: args.common.dt,
        tol: args.tol,
        max_iter: args.max_iter,
        timed: !args.parallel,
    };
    let records = sweep(&SweepConfig {
        base,
        deg_max: args.deg_max,
        m_max: args.m_max,
        parallel: args.parallel,
    })?;
    let tables = aggregate_heatmap(&records);
    print!("{}", tables.rates_csv);
    if let Some(dir) = &args.common.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("rates.csv"), &tables.rates_csv)?;
        std::fs::write(
            dir.join("reductions_per_second.csv"),
            &tables.reductions_per_second_csv,
        )?;
        let mut csv = String::from(RUN_CSV_HEADER);
        for rec in &records {
            csv.push_str(&run_csv_row(rec));
        }
        std::fs::write(dir.join("runs.csv"), csv)?;
        println!("tables written to {}", dir.display());
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let (benchmark, levels) = require_benchmark(&args.common)?;
    let cfg = VerifyConfig {
        benchmark,
        levels,
        k_a: args.common.ka,
        k_s: args.common.ks,
        diag: parse_diag(&args.common.diag)?,
        dt: args.common.dt,
    };
    let report = run_verify(&cfg)?;
    print!("{}", report.oracle_csv);
    print!("{}", report.spectral_csv);
    print!("{}", report.infsup_csv);
    if let Some(dir) = &args.common.out {
        report.write_to(dir)?;
        println!("reports written to {}", dir.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
    }
}
