//! Measurement methodology of the benchmark runs: averaged reduction rate
//! q, time to reduce the residual by a fixed factor, divergence
//! classification and heatmap aggregation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::multigrid::{CycleType, SolveStatus};
use crate::smoother::DiagChoice;

/// One benchmark run: configuration, residual history and timing.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub benchmark: String,
    pub levels: usize,
    pub k_a: usize,
    pub k_s: usize,
    pub m: usize,
    pub cycle: CycleType,
    pub diag: DiagChoice,
    pub dt: Option<f64>,
    pub dofs: usize,
    pub residual_history: Vec<f64>,
    /// Median wall time per iteration in seconds (absent in untimed runs).
    pub time_per_iter: Option<f64>,
    pub status: SolveStatus,
}

impl RunRecord {
    /// Average reduction of the last three recorded steps.
    pub fn q(&self) -> Option<f64> {
        compute_q(&self.residual_history)
    }

    /// Final status folded with the q-based divergence classification.
    pub fn effective_status(&self) -> SolveStatus {
        if self.status == SolveStatus::Diverged {
            return SolveStatus::Diverged;
        }
        if self.residual_history.iter().any(|r| !r.is_finite()) {
            return SolveStatus::Diverged;
        }
        match self.q() {
            Some(q) if q >= 1.0 => SolveStatus::Diverged,
            _ => self.status,
        }
    }

    /// A run counts as convergent if it neither diverged nor stalled.
    pub fn is_convergent(&self) -> bool {
        match self.effective_status() {
            SolveStatus::Converged => true,
            SolveStatus::MaxIter => matches!(self.q(), Some(q) if q < 1.0),
            SolveStatus::Diverged => false,
        }
    }

    /// Cell content for rate tables: q or the hyphen for non-convergent
    /// configurations.
    pub fn q_cell(&self) -> String {
        if self.is_convergent() {
            match self.q() {
                Some(q) => format!("{q:.4}"),
                None => String::from("-"),
            }
        } else {
            String::from("-")
        }
    }
}

/// Average reduction q = (r^j / r^{j-3})^{1/3} over the last three steps;
/// undefined (None) for histories shorter than four entries.
pub fn compute_q(residual_history: &[f64]) -> Option<f64> {
    let n = residual_history.len();
    if n < 4 {
        return None;
    }
    let rj = residual_history[n - 1];
    let r3 = residual_history[n - 4];
    if !(rj.is_finite() && r3 > 0.0) {
        return None;
    }
    Some((rj / r3).powf(1.0 / 3.0))
}

/// Time to reduce the error by `eps`: T = T_iter * log(eps) / log(q);
/// undefined for q >= 1.
pub fn compute_t(q: f64, t_iter: f64, eps: f64) -> Option<f64> {
    if !(q > 0.0 && q < 1.0 && t_iter > 0.0) {
        return None;
    }
    Some(t_iter * eps.ln() / q.ln())
}

/// Reduction factor 0.1 used by the timing tables.
pub const T_EPSILON: f64 = 0.1;

/// Heatmap tables: rows are smoothing steps m, columns (k_A, k_S) pairs,
/// cells are q (or the hyphen). The companion table holds eps-reductions
/// per second, 1/T(eps).
#[derive(Debug, Clone)]
pub struct HeatmapTables {
    pub rates_csv: String,
    pub reductions_per_second_csv: String,
}

/// Aggregate run records into the two heatmap CSV tables.
///
/// Column order: m first, then all (k_A,k_S) pairs present in the input in
/// ascending lexicographic order; rows ascending in m.
pub fn aggregate_heatmap(records: &[RunRecord]) -> HeatmapTables {
    let mut pairs: Vec<(usize, usize)> = records.iter().map(|r| (r.k_a, r.k_s)).collect();
    pairs.sort_unstable();
    pairs.dedup();
    let mut ms: Vec<usize> = records.iter().map(|r| r.m).collect();
    ms.sort_unstable();
    ms.dedup();

    let mut header = String::from("m");
    for (ka, ks) in &pairs {
        header.push_str(&format!(",k=({ka}:{ks})"));
    }
    header.push('\n');
    let mut rates = header.clone();
    let mut rps = header;
    for &m in &ms {
        let mut rate_row = format!("{m}");
        let mut rps_row = format!("{m}");
        for &(ka, ks) in &pairs {
            let cell = records
                .iter()
                .find(|r| r.m == m && r.k_a == ka && r.k_s == ks);
            match cell {
                Some(rec) => {
                    rate_row.push(',');
                    rate_row.push_str(&rec.q_cell());
                    let rps_cell = rec
                        .q()
                        .filter(|_| rec.is_convergent())
                        .zip(rec.time_per_iter)
                        .and_then(|(q, t)| compute_t(q, t, T_EPSILON))
                        .map(|t| format!("{:.4}", 1.0 / t));
                    rps_row.push(',');
                    rps_row.push_str(rps_cell.as_deref().unwrap_or("-"));
                }
                None => {
                    rate_row.push_str(",-");
                    rps_row.push_str(",-");
                }
            }
        }
        rate_row.push('\n');
        rps_row.push('\n');
        rates.push_str(&rate_row);
        rps.push_str(&rps_row);
    }
    HeatmapTables {
        rates_csv: rates,
        reductions_per_second_csv: rps,
    }
}

/// Stable column order of the flat per-run CSV.
pub const RUN_CSV_HEADER: &str =
    "benchmark,levels,ka,ks,m,cycle,diag,dt,dofs,iterations,status,q,final_residual,t_iter,t_eps\n";

/// One CSV row per run (columns per [`RUN_CSV_HEADER`]).
pub fn run_csv_row(rec: &RunRecord) -> String {
    let q_str = rec.q().map(|q| format!("{q:.6}")).unwrap_or_default();
    let t_iter = rec
        .time_per_iter
        .map(|t| format!("{t:.6e}"))
        .unwrap_or_default();
    let t_eps = rec
        .q()
        .filter(|_| rec.is_convergent())
        .zip(rec.time_per_iter)
        .and_then(|(q, t)| compute_t(q, t, T_EPSILON))
        .map(|t| format!("{t:.6e}"))
        .unwrap_or_default();
    let final_res = rec
        .residual_history
        .last()
        .map(|r| format!("{r:.6e}"))
        .unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        rec.benchmark,
        rec.levels,
        rec.k_a,
        rec.k_s,
        rec.m,
        rec.cycle.as_str(),
        rec.diag.as_str(),
        rec.dt.map(|d| format!("{d}")).unwrap_or_default(),
        rec.dofs,
        rec.residual_history.len().saturating_sub(1),
        rec.effective_status().as_str(),
        q_str,
        final_res,
        t_iter,
        t_eps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn record(m: usize, ka: usize, ks: usize, history: Vec<f64>, status: SolveStatus) -> RunRecord {
        RunRecord {
            benchmark: "cavity2d".to_string(),
            levels: 3,
            k_a: ka,
            k_s: ks,
            m,
            cycle: CycleType::W,
            diag: DiagChoice::Local,
            dt: None,
            dofs: 659,
            residual_history: history,
            time_per_iter: Some(0.5),
            status,
        }
    }

    #[test]
    fn q_geometric_sequences() {
        assert_eq!(compute_q(&[1.0, 0.5, 0.25, 0.125]), Some(0.5));
        let q = compute_q(&[1.0, 1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        assert!((q - 0.1).abs() < 1e-15);
    }

    #[test]
    fn q_undefined_for_short_history() {
        assert_eq!(compute_q(&[1.0, 0.5, 0.25]), None);
        assert_eq!(compute_q(&[]), None);
    }

    #[test]
    fn growth_classified_as_diverged() {
        let rec = record(1, 0, 0, vec![1.0, 0.9, 0.95, 1.1, 1.3], SolveStatus::MaxIter);
        let q = rec.q().unwrap();
        assert!(q > 1.0);
        assert_eq!(rec.effective_status(), SolveStatus::Diverged);
        assert_eq!(rec.q_cell(), "-");
    }

    #[test]
    fn q_scale_invariance() {
        let base = [3.0, 1.4, 0.9, 0.33, 0.21];
        let q1 = compute_q(&base).unwrap();
        for scale in [1e-7, 2.0, 3.3e9] {
            let scaled: Vec<f64> = base.iter().map(|r| r * scale).collect();
            let q2 = compute_q(&scaled).unwrap();
            assert_eq!(q1, q2);
        }
    }

    #[test]
    fn t_examples() {
        assert!((compute_t(0.1, 1.0, T_EPSILON).unwrap() - 1.0).abs() < 1e-15);
        let t = compute_t(0.5, 2.0, T_EPSILON).unwrap();
        assert!((t - 2.0 * (0.1f64).ln() / (0.5f64).ln()).abs() < 1e-12);
        assert!((t - 6.6439).abs() < 1e-4);
        assert_eq!(compute_t(1.0, 1.0, T_EPSILON), None);
    }

    #[test]
    fn t_monotone_increasing_in_q() {
        // A worse (larger) reduction rate needs more time per decade.
        let mut prev = 0.0;
        for i in 1..20 {
            let q = i as f64 / 20.0;
            let t = compute_t(q, 1.0, T_EPSILON).unwrap();
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn heatmap_empty_input() {
        let tables = aggregate_heatmap(&[]);
        assert_eq!(tables.rates_csv, "m\n");
    }

    #[test]
    fn heatmap_single_record_and_hyphen() {
        let good = record(2, 1, 1, vec![1.0, 0.5, 0.25, 0.125], SolveStatus::Converged);
        let bad = record(1, 0, 0, vec![1.0, 2.0, 4.0, 8.0], SolveStatus::MaxIter);
        let tables = aggregate_heatmap(&[good, bad]);
        let lines: Vec<&str> = tables.rates_csv.lines().collect();
        assert_eq!(lines[0], "m,k=(0:0),k=(1:1)");
        assert_eq!(lines[1], "1,-,-");
        assert_eq!(lines[2], "2,-,0.5000");
    }

    #[test]
    fn run_csv_row_is_stable() {
        let rec = record(2, 1, 1, vec![1.0, 0.5, 0.25, 0.125], SolveStatus::Converged);
        let row = run_csv_row(&rec);
        assert!(row.starts_with("cavity2d,3,1,1,2,W,loc,,659,3,converged,0.500000"));
    }
}
