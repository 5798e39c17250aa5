use maisac::crb::{crb_expanded, CrbParams};
use maisac::model::sample_covariance;
use maisac::{run_algorithm1, AoMode, Config};
use maisac_sim::sweep::{draw_scenario, write_csv_to};
use maisac_sim::{run_sweep, RunOptions, SweepSpec, SweepVariable};

fn small() -> Config {
    Config {
        n_tx: 4,
        n_rx: 4,
        n_users: 2,
        ..Config::default()
    }
}

fn spec(variable: SweepVariable, grid: Vec<f64>, modes: Vec<AoMode>, seeds: usize) -> SweepSpec {
    SweepSpec {
        grid,
        modes,
        n_seeds: seeds,
        ..SweepSpec::new(small(), variable)
    }
}

fn csv(rows: &[maisac_sim::TrialRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv_to(rows, &mut buf).unwrap();
    buf
}

#[test]
fn rows_are_ordered_and_independent_of_jobs() {
    let s = spec(SweepVariable::SinrDb, vec![5.0, 10.0], vec![AoMode::Fpa, AoMode::BsMaOnly], 3);
    let a = run_sweep(&s, RunOptions { jobs: 1, wall_time: false }).unwrap();
    let b = run_sweep(&s, RunOptions { jobs: 3, wall_time: false }).unwrap();
    assert_eq!(csv(&a.rows), csv(&b.rows));
    let keys: Vec<_> = a.rows.iter().map(|r| (r.sweep_value, r.mode, r.seed)).collect();
    let mut want = Vec::new();
    for v in [5.0, 10.0] {
        for m in [AoMode::Fpa, AoMode::BsMaOnly] {
            for seed in 0..3 {
                want.push((v, m, seed));
            }
        }
    }
    assert_eq!(keys, want);
}

#[test]
fn power_sweep_decreases_per_seed() {
    let s = spec(SweepVariable::PowerDbm, vec![20.0, 30.0, 40.0], vec![AoMode::FullMa], 2);
    let out = run_sweep(&s, RunOptions::default()).unwrap();
    for seed in 0..2 {
        let curve: Vec<f64> = out.rows.iter().filter(|r| r.seed == seed).map(|r| r.crb_db).collect();
        assert_eq!(curve.len(), 3);
        for w in curve.windows(2) {
            assert!(w[1] < w[0], "seed {seed}: {curve:?}");
        }
    }
}

#[test]
fn infeasible_trials_become_rows() {
    let s = spec(SweepVariable::SinrDb, vec![10.0, 80.0], vec![AoMode::Fpa], 2);
    let out = run_sweep(&s, RunOptions::default()).unwrap();
    assert_eq!(out.rows.len(), 4);
    for r in &out.rows {
        if r.sweep_value == 80.0 {
            assert!(!r.feasible);
            assert_eq!(r.crb, f64::INFINITY);
        } else {
            assert!(r.feasible && r.crb.is_finite());
        }
    }
    assert_eq!(out.failures.len(), 2);
    assert!(!out.has_consistency_error());
}

#[test]
fn row_crb_is_rederivable_from_trace() {
    let s = spec(SweepVariable::RegionWavelengths, vec![3.0], vec![AoMode::FullMa], 2);
    let out = run_sweep(&s, RunOptions::default()).unwrap();
    for row in &out.rows {
        let config = s.variable.apply(&s.base_config, row.sweep_value);
        let scenario = draw_scenario(&s.base_config, s.master_seed, row.seed);
        let trace = run_algorithm1(&config, &scenario, row.mode, &s.settings).unwrap();
        let last = trace.last();
        let layout = trace.final_layout(&config);
        let mut p = CrbParams::from_config(&config);
        p.reflect_gain = scenario.reflect_gain;
        let crb = crb_expanded(&layout.d_t, &last.d_r, &sample_covariance(&last.beamformer), &p).unwrap();
        assert!((crb - row.crb).abs() <= 1e-12 * row.crb);
        assert_eq!(row.outer_iters, trace.outer_iterations());
    }
}

#[test]
fn wall_time_is_opt_in() {
    let s = spec(SweepVariable::PowerDbm, vec![30.0], vec![AoMode::Fpa], 1);
    let quiet = run_sweep(&s, RunOptions::default()).unwrap();
    assert_eq!(quiet.rows[0].wall_ms, 0.0);
    let timed = run_sweep(&s, RunOptions { jobs: 1, wall_time: true }).unwrap();
    assert!(timed.rows[0].wall_ms > 0.0);
}

#[test]
fn empty_grid_is_rejected() {
    let s = spec(SweepVariable::PowerDbm, vec![], vec![AoMode::Fpa], 1);
    assert!(run_sweep(&s, RunOptions::default()).is_err());
}
