//! JSON run-configuration files (same fields as the CLI flags).

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use stokes_mg::multigrid::CycleType;
use stokes_mg::smoother::DiagChoice;

use crate::runner::RunConfig;

/// Serialized run configuration. Optional fields fall back to the CLI
/// defaults (tol 1e-10, max_iter 15, diag "loc", cycle "W").
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigFile {
    pub benchmark: String,
    pub levels: usize,
    #[serde(default = "default_degree")]
    pub ka: usize,
    #[serde(default = "default_degree")]
    pub ks: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_cycle")]
    pub cycle: String,
    #[serde(default = "default_diag")]
    pub diag: String,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_degree() -> usize {
    3
}
fn default_steps() -> usize {
    3
}
fn default_cycle() -> String {
    "W".to_string()
}
fn default_diag() -> String {
    "loc".to_string()
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    15
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ConfigFile = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn to_run_config(&self) -> Result<RunConfig> {
        Ok(RunConfig {
            benchmark: self.benchmark.clone(),
            levels: self.levels,
            k_a: self.ka,
            k_s: self.ks,
            m: self.steps,
            cycle: CycleType::parse(&self.cycle)
                .ok_or_else(|| anyhow!("cycle must be V or W, got '{}'", self.cycle))?,
            diag: DiagChoice::parse(&self.diag)
                .ok_or_else(|| anyhow!("diag must be exact|d|p|loc, got '{}'", self.diag))?,
            dt: self.dt,
            tol: self.tol,
            max_iter: self.max_iter,
            timed: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_defaults() {
        let json = r#"{"benchmark": "cavity2d", "levels": 4, "ka": 2, "ks": 1, "steps": 2, "cycle": "V", "diag": "p"}"#;
        let cfg: ConfigFile = serde_json::from_str(json).unwrap();
        let rc = cfg.to_run_config().unwrap();
        assert_eq!(rc.benchmark, "cavity2d");
        assert_eq!(rc.levels, 4);
        assert_eq!(rc.k_a, 2);
        assert_eq!(rc.m, 2);
        assert_eq!(rc.cycle, CycleType::V);
        assert_eq!(rc.diag, DiagChoice::PressureMass);
        assert_eq!(rc.tol, 1e-10);
        assert_eq!(rc.max_iter, 15);
    }

    #[test]
    fn bad_cycle_rejected() {
        let json = r#"{"benchmark": "cavity2d", "levels": 2, "cycle": "Z"}"#;
        let cfg: ConfigFile = serde_json::from_str(json).unwrap();
        assert!(cfg.to_run_config().is_err());
    }
}
