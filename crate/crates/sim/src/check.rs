//! Quick self-test behind `maisac check`: oracle and invariant checks on a
//! handful of seeded instances.

use maisac::crb::{crb_expanded, crb_general, fisher_bracket, steering_context, CrbParams};
use maisac::model::{all_sinrs, channels_for, draw_random_geometry, sample_covariance};
use maisac::subproblems::{assemble_p21, path_covariance, solve_beamforming_sdr, user_surrogate, varsigma};
use maisac::{init_state, run_algorithm1, AoMode, AoSettings, Config};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &'static str, worst: f64, limit: f64, what: &str) -> CheckResult {
    CheckResult {
        name,
        passed: worst <= limit,
        detail: format!("worst {what} {worst:.3e} (limit {limit:.0e})"),
    }
}

fn small(config: &Config, n_tx: usize, n_rx: usize, k: usize) -> Config {
    Config {
        n_tx,
        n_rx,
        n_users: k,
        ..config.clone()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn crb_forms(config: &Config) -> CheckResult {
    let mut worst: f64 = 0.0;
    for seed in 0..30u64 {
        let c = small(config, 2 + (seed % 4) as usize * 2, 2 + (seed % 3) as usize * 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Ok(layout) = init_state(&c, AoMode::FullMa) else { continue };
        let g = maisac::CMat64::from_fn(c.n_tx, 2, |_, _| maisac::C64::new(rng.random(), rng.random()));
        let r = &g * g.adjoint();
        let p = CrbParams::from_config(&c);
        let a = crb_expanded(&layout.d_t, &layout.d_r, &r, &p).unwrap_or(f64::NAN);
        let b = crb_general(&steering_context(&layout.d_t, &layout.d_r, p.theta, p.wavelength), &r, &p)
            .unwrap_or(f64::NAN);
        worst = worst.max(if a == b { 0.0 } else { rel(a, b) });
    }
    result("crb formulas agree", worst, 1e-8, "relative difference")
}

fn sdr_recovery(config: &Config) -> CheckResult {
    let c = small(config, 4, config.n_rx, 2);
    let mut worst_sinr: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let mut solved = 0;
    for seed in 0..10u64 {
        let sc = draw_random_geometry(&c, &mut ChaCha8Rng::seed_from_u64(seed));
        let Ok(layout) = init_state(&c, AoMode::FullMa) else { break };
        let ctx = steering_context(&layout.d_t, &layout.d_r, c.target_angle, c.wavelength);
        let ch = channels_for(&c, &sc, &layout);
        let Ok(out) = solve_beamforming_sdr(&ctx, &ch, &c) else { continue };
        solved += 1;
        for s in all_sinrs(&out.recovered, &ch, c.noise_comm).unwrap_or_default() {
            worst_sinr = worst_sinr.max((c.sinr_threshold - s) / c.sinr_threshold);
        }
        let got = fisher_bracket(&ctx, &sample_covariance(&out.recovered)).unwrap_or(0.0);
        worst_gap = worst_gap.max((out.t_value - got) / out.t_value);
    }
    let passed = solved > 0 && worst_sinr <= 1e-6 && worst_gap <= 1e-4;
    CheckResult {
        name: "beamforming relaxation and recovery",
        passed,
        detail: format!("{solved}/10 solved, worst SINR deficit {worst_sinr:.2e}, worst objective gap {worst_gap:.2e}"),
    }
}

fn user_bounds(config: &Config) -> CheckResult {
    let c = small(config, 4, config.n_rx, 3);
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sc = draw_random_geometry(&c, &mut rng);
        let Ok(layout) = init_state(&c, AoMode::FullMa) else { break };
        let w = maisac::Beamformer::new(maisac::CMat64::from_fn(4, 3, |_, _| {
            maisac::C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        }));
        let k = (seed % 3) as usize;
        let geom = &sc.users[k];
        let h = c.user_region_half_side;
        let center = maisac::model::Position::new(0.3 * h, -0.2 * h);
        let sur = user_surrogate(&center, k, &w, geom, &layout.tx_positions_2d, c.wavelength);
        for q in 0..3 {
            let a = path_covariance(geom, &layout.tx_positions_2d, &w.beam(q), c.wavelength);
            let n = 30;
            for i in 0..n {
                for j in 0..n {
                    let u = maisac::model::Position::new(
                        -h + 2.0 * h * i as f64 / (n - 1) as f64,
                        -h + 2.0 * h * j as f64 / (n - 1) as f64,
                    );
                    let exact = varsigma(&u, &a, geom, c.wavelength);
                    let bound = if q == k { sur.eta_lower(&u) } else { sur.upper(q, &u) };
                    let excess = if q == k { bound - exact } else { exact - bound };
                    worst = worst.max(excess / sur.values_at_center[q].abs().max(exact).max(1e-300));
                }
            }
        }
    }
    result("user power bounds dominate", worst, 1e-10, "relative violation")
}

fn receive_minorant(config: &Config) -> CheckResult {
    let c = small(config, 6, config.n_rx, 2);
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Ok(layout) = init_state(&c, AoMode::FullMa) else { break };
        let ctx = steering_context(&layout.d_t, &layout.d_r, c.target_angle, c.wavelength);
        let g = maisac::CMat64::from_fn(6, 2, |_, _| maisac::C64::new(rng.random(), rng.random()));
        let r = &g * g.adjoint();
        let data = assemble_p21(&layout.d_r, &ctx, &r);
        for _ in 0..50 {
            let slack = c.d_max - (c.n_rx.saturating_sub(1)) as f64 * c.d_min;
            let mut cuts: Vec<f64> = (0..c.n_rx).map(|_| rng.random::<f64>() * slack).collect();
            cuts.sort_by(f64::total_cmp);
            let d = DVector::from_fn(c.n_rx, |i, _| cuts[i] + i as f64 * c.d_min);
            let t = data.true_objective(&d);
            worst = worst.max((data.surrogate(&d) - t) / t.abs().max(1e-300));
        }
    }
    result("receive surrogate is a minorant", worst, 1e-12, "relative excess")
}

fn ao_monotone(config: &Config) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for seed in 0..2u64 {
        let sc = draw_random_geometry(config, &mut ChaCha8Rng::seed_from_u64(seed));
        let Ok(trace) = run_algorithm1(config, &sc, AoMode::FullMa, &AoSettings::default()) else { continue };
        runs += 1;
        for w in trace.crbs().windows(2) {
            worst = worst.max((w[1] - w[0]) / w[0]);
        }
        if trace.records.iter().any(|r| !r.violations.is_empty()) {
            worst = f64::INFINITY;
        }
    }
    let mut r = result("alternating loop is monotone", worst, 1e-7, "relative increase");
    r.passed &= runs > 0;
    r.detail = format!("{runs}/2 runs, {}", r.detail);
    r
}

pub fn run_checks(config: &Config) -> Vec<CheckResult> {
    vec![
        crb_forms(config),
        sdr_recovery(config),
        user_bounds(config),
        receive_minorant(config),
        ao_monotone(config),
    ]
}
