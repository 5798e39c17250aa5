//! Runs every mode on a few random draws of the default scenario and prints
//! the final CRB of each.

use maisac::{evaluate_final, run_algorithm1, AoMode, AoSettings, Config};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let config = Config::default();
    let settings = AoSettings::default();
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = maisac::model::draw_random_geometry(&config, &mut rng);
        for mode in AoMode::ALL {
            let t0 = std::time::Instant::now();
            match run_algorithm1(&config, &scenario, mode, &settings) {
                Ok(trace) => {
                    let summary = evaluate_final(&trace, &config, &scenario);
                    let crb = trace.last().crb;
                    println!(
                        "seed {seed} {mode:>8}: crb {crb:.4e} iters {:2} converged {} final-check {} ({:.0} ms)",
                        trace.outer_iterations(),
                        trace.converged,
                        if summary.is_ok() { "ok" } else { "FAILED" },
                        t0.elapsed().as_secs_f64() * 1e3
                    );
                }
                Err(e) => println!("seed {seed} {mode:>8}: {e}"),
            }
        }
    }
}
