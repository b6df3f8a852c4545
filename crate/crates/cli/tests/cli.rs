use std::path::Path;
use std::process::{Command, Output};

fn twotime(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twotime")).args(args).output().unwrap()
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.cfg");
    std::fs::write(&p, "# tiny run\nirs_rows = 2\nirs_cols = 2\nn_samples = 20\nbatch_size = 10\nswarm_size = 3\nn_iters = 2\n").unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn writes_rho_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("rho.csv");
    let o = twotime(&["--experiment", "aar_vs_rho", "--config", &cfg, "--seed", "3", "--out", out.to_str().unwrap(), "--frames", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",3")));
}

#[test]
fn timing_run_reports_flops() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("t.csv");
    let o = twotime(&["--experiment", "timing_vs_elements", "--config", &cfg, "--out", out.to_str().unwrap(), "--frames", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("N = 64: flops per iteration mbs 5929560 lbo 599640"), "{stdout}");
}

#[test]
fn unknown_flag_fails() {
    let o = twotime(&["--experiment", "aar_vs_rho", "--out", "x.csv", "--turbo"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--turbo"));
}

#[test]
fn unknown_experiment_fails() {
    let o = twotime(&["--experiment", "aar_vs_moon", "--out", "x.csv"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("aar_vs_moon"));
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cfg");
    std::fs::write(&p, "n_tx = 8\nbatch_size = 7\n").unwrap();
    let o = twotime(&["--experiment", "aar_vs_rho", "--config", p.to_str().unwrap(), "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error:") && err.contains("batch_size"), "{err}");
}

#[test]
fn unwritable_output_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = twotime(&["--experiment", "aar_vs_rho", "--config", &cfg, "--out", "/nonexistent-dir/x.csv", "--frames", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonexistent-dir"));
}

#[test]
fn zero_frames_rejected() {
    let o = twotime(&["--experiment", "aar_vs_rho", "--out", "x.csv", "--frames", "0"]);
    assert!(!o.status.success());
}
