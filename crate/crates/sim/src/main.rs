use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maisac::model::linear_to_db;
use maisac::{evaluate_final, run_algorithm1, AoMode, Error};
use maisac_sim::sweep::{draw_scenario, write_csv_to};
use maisac_sim::{format_table, load_config, parse_config, run_sweep, summarize, write_csv, LoadedConfig, RunOptions, SweepVariable};

const EXIT_CONFIG: u8 = 1;
const EXIT_CONSISTENCY: u8 = 2;

#[derive(Parser)]
#[command(name = "maisac", version, about = "CRB-minimizing beamforming and antenna placement sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write one CSV row per trial.
    Run {
        /// JSON configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// power | sinr | region (overrides the file)
        #[arg(long)]
        sweep: Option<SweepVariable>,
        /// Comma-separated modes: full-ma, fpa, bs-ma, user-ma
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<AoMode>>,
        #[arg(long)]
        seeds: Option<usize>,
        /// Comma-separated grid (overrides the file and the default grid)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        grid: Option<Vec<f64>>,
        /// CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Record measured wall time per trial (makes the CSV non-reproducible).
        #[arg(long)]
        wall_time: bool,
    },
    /// Run the built-in oracle and invariant checks.
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Optimize a single instance and print its final state.
    CrbEval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "full-ma")]
        mode: AoMode,
        /// Seed index of the geometry draw.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(path: Option<&PathBuf>) -> Result<LoadedConfig, ExitCode> {
    let loaded = match path {
        Some(p) => load_config(p),
        None => parse_config("{}"),
    };
    loaded.map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}

fn run(command: Command) -> Result<(), ExitCode> {
    match command {
        Command::Run {
            config,
            sweep,
            modes,
            seeds,
            grid,
            out,
            jobs,
            wall_time,
        } => {
            let loaded = load(config.as_ref())?;
            let mut spec = loaded.sweep;
            if let Some(v) = sweep {
                spec.variable = v;
                spec.grid = v.default_grid();
            }
            if let Some(g) = grid {
                spec.grid = g;
            }
            if let Some(m) = modes {
                spec.modes = m;
            }
            if let Some(s) = seeds {
                spec.n_seeds = s;
            }
            let outcome = run_sweep(&spec, RunOptions { jobs, wall_time }).map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            })?;
            let written = match &out {
                Some(p) => write_csv(&outcome.rows, p),
                None => write_csv_to(&outcome.rows, std::io::stdout().lock()),
            };
            if let Err(e) = written {
                eprintln!("error: writing CSV: {e}");
                return Err(ExitCode::from(EXIT_CONFIG));
            }
            let table = format_table(&summarize(&outcome.rows, spec.master_seed), spec.variable.name());
            if out.is_some() {
                print!("{table}");
            } else {
                eprint!("{table}");
            }
            for f in &outcome.failures {
                eprintln!("trial {}={} {} seed {}: {}", spec.variable, f.sweep_value, f.mode, f.seed, f.error);
            }
            if outcome.has_consistency_error() {
                return Err(ExitCode::from(EXIT_CONSISTENCY));
            }
            Ok(())
        }
        Command::Check { config } => {
            let loaded = load(config.as_ref())?;
            let results = maisac_sim::check::run_checks(&loaded.config);
            for r in &results {
                println!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if results.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(ExitCode::from(EXIT_CONSISTENCY))
            }
        }
        Command::CrbEval { config, mode, seed } => {
            let loaded = load(config.as_ref())?;
            let c = &loaded.config;
            let scenario = draw_scenario(c, loaded.sweep.master_seed, seed);
            let outcome = run_algorithm1(c, &scenario, mode, &loaded.sweep.settings)
                .and_then(|t| evaluate_final(&t, c, &scenario).map(|s| (t, s)));
            match outcome {
                Ok((trace, s)) => {
                    println!("mode          {mode}");
                    println!("crb           {:e} rad^2 ({:.4} dB)", s.crb, 10.0 * s.crb.log10());
                    println!("crb (general) {:e} rad^2", s.crb_general);
                    println!("iterations    {} (converged: {})", s.outer_iterations, s.converged);
                    println!("power         {:.6} W of {:.6} W", s.power, c.power_budget);
                    let sinrs: Vec<String> = s.sinrs.iter().map(|x| format!("{:.3}", linear_to_db(*x))).collect();
                    println!("sinr dB       {}", sinrs.join(" "));
                    let d_r: Vec<String> = s.d_r.iter().map(|x| format!("{:.4}", x / c.wavelength)).collect();
                    println!("d_r / lambda  {}", d_r.join(" "));
                    for (k, u) in s.user_positions.iter().enumerate() {
                        println!("user {k} at     ({:.4}, {:.4}) lambda", u.x / c.wavelength, u.y / c.wavelength);
                    }
                    let crbs: Vec<String> = trace.crbs().iter().map(|x| format!("{x:.6e}")).collect();
                    println!("crb trace     {}", crbs.join(" "));
                    Ok(())
                }
                Err(e @ Error::Consistency(_)) => {
                    eprintln!("error: {e}");
                    Err(ExitCode::from(EXIT_CONSISTENCY))
                }
                Err(e) => {
                    println!("mode          {mode}");
                    println!("infeasible    {e}");
                    Ok(())
                }
            }
        }
    }
}
