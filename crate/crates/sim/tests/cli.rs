use std::process::Command;

use maisac_sim::sweep::{read_csv, CSV_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maisac"))
}

const SMALL: &str = r#"{"n_tx": 4, "n_rx": 4, "n_users": 2, "sweep": {"variable": "power", "grid": [25, 35], "modes": ["fpa"], "seeds": 2}}"#;

fn write_config(dir: &tempfile::TempDir, text: &str) -> std::path::PathBuf {
    let p = dir.path().join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, SMALL);
    let out = dir.path().join("rows.csv");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--modes", "fpa,bs-ma", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    let rows = read_csv(&text).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2);
    let stdout = String::from_utf8(status.stdout).unwrap();
    assert!(stdout.contains("bs-ma") && stdout.contains("mean dB"));
}

#[test]
fn identical_invocations_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, SMALL);
    let mut files = Vec::new();
    for (i, jobs) in ["1", "1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("rows{i}.csv"));
        let s = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .args(["--jobs", jobs, "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(s.status.success());
        files.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad_json = write_config(&dir, "{ \"n_tx\": ");
    let out = bin().args(["crb-eval", "--config"]).arg(&bad_json).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    let bad_value = write_config(&dir, r#"{"power_w": -2}"#);
    let out = bin().args(["run", "--config"]).arg(&bad_value).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let missing = bin().args(["check", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn crb_eval_prints_final_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, SMALL);
    let out = bin()
        .args(["crb-eval", "--mode", "bs-ma", "--seed", "1", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("crb ") && text.contains("d_r / lambda"), "{text}");
}

#[test]
fn check_passes_on_small_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, r#"{"n_tx": 4, "n_rx": 4, "n_users": 2}"#);
    let out = bin().args(["check", "--config"]).arg(&cfg).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 5);
}
