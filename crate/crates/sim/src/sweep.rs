//! Seeded trials over a parameter grid.
//!
//! Trials are paired: the random geometry depends only on the master seed and
//! the seed index, so every grid value and every mode sees the same users and
//! channels for a given seed. Comparisons across modes and trends along the
//! grid are then per-instance, not just in distribution.

use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use maisac::model::draw_random_geometry;
use maisac::{evaluate_final, run_algorithm1, AoMode, AoSettings, Config, Error, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::SweepSpec;

/// One step of the splitmix64 generator; a fixed, documented mixer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the geometry draw for `seed_index`. Independent of the grid and
/// the mode, so adding grid points or modes never changes existing trials.
pub fn scenario_seed(master: u64, seed_index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ seed_index)
}

pub fn draw_scenario(config: &Config, master: u64, seed_index: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed(master, seed_index));
    draw_random_geometry(config, &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub sweep_value: f64,
    pub mode: AoMode,
    pub seed: u64,
    /// rad²; `+∞` for infeasible trials.
    pub crb: f64,
    pub crb_db: f64,
    pub outer_iters: usize,
    pub feasible: bool,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub sweep_value: f64,
    pub mode: AoMode,
    pub seed: u64,
    pub error: Error,
}

impl TrialFailure {
    pub fn is_consistency(&self) -> bool {
        matches!(self.error, Error::Consistency(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub jobs: usize,
    /// Record measured wall time. Off by default so that the CSV is a pure
    /// function of the inputs; when off the column holds 0.
    pub wall_time: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 1, wall_time: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutcome {
    /// Ordered by grid value, then mode (in `SweepSpec::modes` order), then seed.
    pub rows: Vec<TrialRow>,
    pub failures: Vec<TrialFailure>,
}

impl SweepOutcome {
    pub fn has_consistency_error(&self) -> bool {
        self.failures.iter().any(TrialFailure::is_consistency)
    }
}

/// Runs one trial; the final state is recomputed and certified before the
/// row is emitted.
pub fn run_trial(
    config: &Config,
    scenario: &Scenario,
    mode: AoMode,
    settings: &AoSettings<f64>,
) -> Result<(f64, usize), Error> {
    let trace = run_algorithm1(config, scenario, mode, settings)?;
    let summary = evaluate_final(&trace, config, scenario)?;
    Ok((summary.crb, summary.outer_iterations))
}

fn crb_db(crb: f64) -> f64 {
    if crb.is_finite() && crb > 0.0 {
        10.0 * crb.log10()
    } else {
        f64::INFINITY
    }
}

pub fn run_sweep(spec: &SweepSpec, opts: RunOptions) -> Result<SweepOutcome, crate::config::ConfigError> {
    spec.validate()?;
    let scenarios: Vec<Scenario> = (0..spec.n_seeds as u64)
        .map(|s| draw_scenario(&spec.base_config, spec.master_seed, s))
        .collect();
    let tasks: Vec<(f64, AoMode, u64)> = spec
        .grid
        .iter()
        .flat_map(|&v| {
            spec.modes
                .iter()
                .flat_map(move |&m| (0..spec.n_seeds as u64).map(move |s| (v, m, s)))
        })
        .collect();
    let run = |&(value, mode, seed): &(f64, AoMode, u64)| {
        let config = spec.variable.apply(&spec.base_config, value);
        let started = Instant::now();
        let result = run_trial(&config, &scenarios[seed as usize], mode, &spec.settings);
        let wall_ms = if opts.wall_time {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        (value, mode, seed, result, wall_ms)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .expect("thread pool");
    // indexed collect keeps task order whatever the pool size
    let results: Vec<_> = pool.install(|| tasks.par_iter().map(run).collect());

    let mut out = SweepOutcome::default();
    for (value, mode, seed, result, wall_ms) in results {
        let (crb, outer_iters, feasible) = match result {
            Ok((crb, iters)) => (crb, iters, crb.is_finite()),
            Err(error) => {
                out.failures.push(TrialFailure {
                    sweep_value: value,
                    mode,
                    seed,
                    error,
                });
                (f64::INFINITY, 0, false)
            }
        };
        out.rows.push(TrialRow {
            sweep_value: value,
            mode,
            seed,
            crb,
            crb_db: crb_db(crb),
            outer_iters,
            feasible,
            wall_ms,
        });
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "sweep_value,mode,seed,crb,crb_db,outer_iters,feasible,wall_ms";

/// Shortest round-trip decimal; infinities as `inf`/`-inf`.
fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

pub fn write_csv_to<W: Write>(rows: &[TrialRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.sweep_value),
            r.mode,
            r.seed,
            fmt_f64(r.crb),
            fmt_f64(r.crb_db),
            r.outer_iters,
            r.feasible,
            fmt_f64(r.wall_ms)
        )?;
    }
    w.flush()
}

pub fn write_csv(rows: &[TrialRow], path: &Path) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(rows, io::BufWriter::new(file))
}

pub fn read_csv(text: &str) -> Result<Vec<TrialRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err("unexpected header".into());
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(format!("line {}: expected 8 fields", i + 2));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2));
            Ok(TrialRow {
                sweep_value: num(f[0])?,
                mode: f[1].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
                seed: f[2].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
                crb: num(f[3])?,
                crb_db: num(f[4])?,
                outer_iters: f[5].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
                feasible: f[6].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
                wall_ms: num(f[7])?,
            })
        })
        .collect()
}
