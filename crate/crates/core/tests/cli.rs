//! End-to-end checks of the `lab` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lab"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("experiment.cfg");
    fs::write(&path, body).unwrap();
    path
}

const IDENTITIES: &str = "experiment = identities
solver.n = 64
solver.T = 0.25
solver.dt = 1e-3
hamiltonian.gamma = 2
initial.profile = sin
source.preset = smooth
";

#[test]
fn identities_run_exits_zero_and_writes_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &format!("{IDENTITIES}output_dir = {}\n", out.display()));
    let status = lab().arg("identities").arg(&cfg).output().unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let ledger = fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert!(ledger.starts_with("name,residual,scale,tolerance,pass,config_hash"));
    assert!(ledger.lines().skip(1).all(|l| l.contains(",true,")));
    assert!(out.join("config.resolved").exists());
    assert!(out.join("report_dual_bochner.json").exists());
}

#[test]
fn output_directory_can_be_overridden_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{IDENTITIES}output_dir = ignored\n"));
    let target = dir.path().join("env_out");
    let status = lab()
        .arg("identities")
        .arg(&cfg)
        .env("LAB_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(target.join("ledger.csv").exists());
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn configuration_errors_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = identities\nsolver.bogus = 1\n");
    let status = lab().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(status.status.code(), Some(3));

    let below = write_config(
        dir.path(),
        "experiment = lipschitz\nhamiltonian.gamma = 2\nsource.preset = spike_family\nsource.q = 2\n",
    );
    let status = lab().arg("sweep").arg(&below).output().unwrap();
    assert_eq!(status.status.code(), Some(3));
}

#[test]
fn thresholds_prints_csv() {
    let out = lab()
        .args(["thresholds", "--gamma", "2,4", "--N", "1,2", "--q", "4,7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("gamma,N,q,q_min,gamma_conj,m_prime,above_threshold,absorption,theta_reduction")
    );
    assert_eq!(lines.count(), 8);
    assert!(text.contains("2,1,4,3,2,1.75,true,true,"));

    let bad = lab().args(["thresholds", "--gamma", "2", "--N", "1", "--q", "1"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(3));
}
