//! Per-(grid value, mode) statistics of `crb_db` over seeds.

use std::fmt::Write as _;

use maisac::AoMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sweep::{splitmix64, TrialRow};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub sweep_value: f64,
    pub mode: AoMode,
    pub n_feasible: usize,
    pub n_infeasible: usize,
    /// `None` when every trial in the cell was infeasible.
    pub mean_db: Option<f64>,
    pub median_db: Option<f64>,
    /// 95% percentile-bootstrap interval of the mean.
    pub ci_db: Option<(f64, f64)>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Linear-interpolated percentile of sorted data, `p` in `[0, 1]`.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn bootstrap_mean_ci(values: &[f64], seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    (percentile(&means, 0.025), percentile(&means, 0.975))
}

/// Cells come out in first-appearance order of the rows, which for sweep
/// output is grid order then mode order.
pub fn summarize(rows: &[TrialRow], seed: u64) -> Vec<CellSummary> {
    let mut keys: Vec<(f64, AoMode)> = Vec::new();
    for r in rows {
        let key = (r.sweep_value, r.mode);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .enumerate()
        .map(|(i, (value, mode))| {
            let cell: Vec<&TrialRow> = rows.iter().filter(|r| r.sweep_value == value && r.mode == mode).collect();
            let mut vals: Vec<f64> = cell
                .iter()
                .filter(|r| r.feasible && r.crb_db.is_finite())
                .map(|r| r.crb_db)
                .collect();
            vals.sort_by(f64::total_cmp);
            let n_infeasible = cell.len() - vals.len();
            let (mean_db, median_db, ci_db) = if vals.is_empty() {
                (None, None, None)
            } else {
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let ci = bootstrap_mean_ci(&vals, splitmix64(seed ^ i as u64));
                (Some(mean), Some(median(&vals)), Some(ci))
            };
            CellSummary {
                sweep_value: value,
                mode,
                n_feasible: vals.len(),
                n_infeasible,
                mean_db,
                median_db,
                ci_db,
            }
        })
        .collect()
}

/// Mean `crb_db` of `mode` at each grid value, in grid order.
pub fn mean_curve(cells: &[CellSummary], mode: AoMode) -> Vec<(f64, Option<f64>)> {
    cells
        .iter()
        .filter(|c| c.mode == mode)
        .map(|c| (c.sweep_value, c.mean_db))
        .collect()
}

pub fn format_table(cells: &[CellSummary], variable: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>10}  {:<8} {:>5} {:>5}  {:>10} {:>10}  {:>21}",
        variable, "mode", "ok", "inf", "mean dB", "median dB", "95% CI (dB)"
    );
    for c in cells {
        let opt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let ci = c
            .ci_db
            .map_or_else(|| "all infeasible".to_string(), |(lo, hi)| format!("[{lo:.3}, {hi:.3}]"));
        let _ = writeln!(
            s,
            "{:>10}  {:<8} {:>5} {:>5}  {:>10} {:>10}  {:>21}",
            format!("{}", c.sweep_value),
            c.mode.name(),
            c.n_feasible,
            c.n_infeasible,
            opt(c.mean_db),
            opt(c.median_db),
            ci
        );
    }
    s
}
