use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_activeshots"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn assert_golden(name: &str, actual: &[u8]) {
    let path = golden(name);
    if std::env::var_os("ACTIVESHOTS_BLESS").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{name} differs from the golden copy");
}

fn tiny_state(out: &Path, extra: &[&str]) -> Output {
    tiny_state_seeded(out, "5", extra)
}

fn tiny_state_seeded(out: &Path, seed: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "state-fidelity",
        "--qubits",
        "2",
        "--m",
        "6",
        "--n-max",
        "400",
        "--seed",
        seed,
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn state_fidelity_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_state(dir.path(), &["--workers", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().filter(|l| l.contains("[al]") || l.contains("[uniform]")).count(), 2);
    let curves = fs::read(dir.path().join("curves.csv")).unwrap();
    assert!(curves.starts_with(b"policy,n_T,sigma,bias,m\n"));
    assert_golden("state_curves.csv", &curves);
    assert_golden("state_summary.json", &fs::read(dir.path().join("summary.json")).unwrap());
    let m = manifest(dir.path());
    assert_eq!(m["status"], "completed");
    assert_eq!(m["resolved_config"]["m"], 6);
}

#[test]
fn seed_and_worker_count_determine_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert!(tiny_state(a.path(), &["--workers", "1"]).status.success());
    assert!(tiny_state(b.path(), &["--workers", "3"]).status.success());
    assert!(tiny_state_seeded(c.path(), "6", &["--workers", "1"]).status.success());
    for f in ["curves.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_ne!(
        fs::read(a.path().join("curves.csv")).unwrap(),
        fs::read(c.path().join("curves.csv")).unwrap()
    );
}

#[test]
fn manifest_replays_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    assert!(tiny_state(dir.path(), &[]).status.success());
    let first = fs::read(dir.path().join("curves.csv")).unwrap();
    let summary = fs::read(dir.path().join("summary.json")).unwrap();
    let saved = dir.path().join("saved_manifest.json");
    fs::copy(dir.path().join("manifest.json"), &saved).unwrap();
    fs::remove_file(dir.path().join("curves.csv")).unwrap();
    let out = run(&["state-fidelity", "--config", saved.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(first, fs::read(dir.path().join("curves.csv")).unwrap());
    assert_eq!(summary, fs::read(dir.path().join("summary.json")).unwrap());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out_dir = dir.path().join("out");
    fs::write(
        &cfg,
        format!(
            r#"{{"qubits": 1, "m": 4, "n-max": 100, "policy": "uniform", "out": "{}"}}"#,
            out_dir.display()
        ),
    )
    .unwrap();
    let out = run(&["state-fidelity", "--config", cfg.to_str().unwrap(), "--m", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&out_dir);
    assert_eq!(m["resolved_config"]["m"], 7);
    assert_eq!(m["resolved_config"]["n-max"], 100);
    assert_eq!(m["config_file"], cfg.to_str().unwrap());
    let csv = fs::read_to_string(out_dir.join("curves.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("uniform,") && l.ends_with(",7")));
}

#[test]
fn gate_fidelity_with_files() {
    let dir = tempfile::tempdir().unwrap();
    let gate = dir.path().join("x.json");
    fs::write(&gate, "[[0,0],[1,0],[1,0],[0,0]]").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "gate-fidelity",
        "--gate",
        &format!("file:{}", gate.display()),
        "--channel",
        "depol:0.2",
        "--m",
        "5",
        "--n-max",
        "200",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["task"], "gate-fidelity/file/depol:0.2");
    assert!(summary["config_digest"].as_str().unwrap().len() == 64);
}

#[test]
fn state_and_density_files() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("psi.json");
    let rho = dir.path().join("rho.json");
    fs::write(&state, "[[0.7071067811865476,0],[0,0.7071067811865476]]").unwrap();
    fs::write(&rho, "[[0.5,0],[0,-0.4],[0,0.4],[0.5,0]]").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "state-fidelity",
        "--state-file",
        state.to_str().unwrap(),
        "--target-rho",
        &format!("file:{}", rho.display()),
        "--m",
        "4",
        "--n-max",
        "50",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(manifest(&out_dir)["resolved_config"]["qubits"], 1);
}

#[test]
fn improvement_sweep_writes_one_file_per_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "improvement-sweep",
        "--qubits-from",
        "1",
        "--qubits-to",
        "1",
        "--states-per-size",
        "10",
        "--m",
        "300",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("improvement_1q.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("qubits,state_index,improvement"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().enumerate().all(|(j, r)| r.starts_with(&format!("1,{j},"))));
}

#[test]
fn bounds_table_reference_values() {
    let out = run(&["bounds-table", "--n", "100", "--ve", "0.25,1", "--delta", "0.05,0.1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    let find = |v: f64, d: f64| rows.iter().find(|r| r[1] == v && r[2] == d).unwrap().clone();
    assert!((find(0.25, 0.05)[3] - 0.22276).abs() < 1e-4);
    assert!((find(1.0, 0.1)[5] - 0.22460).abs() < 1e-4);
    assert!((find(1.0, 0.1)[4] - 0.21460).abs() < 1e-4);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["gate-fidelity", "--gate", "swap", "--out", o],
        vec!["gate-fidelity", "--gate", "cnot", "--channel", "amp:0.1", "--out", o],
        vec!["state-fidelity", "--m", "4"],
        vec!["state-fidelity", "--qubits", "1", "--policy", "greedy", "--out", o],
        vec!["state-fidelity", "--qubits", "1", "--n-max", "3", "--out", o],
        vec!["state-fidelity", "--qubits", "1", "--delta", "1.5", "--out", o],
        vec!["state-fidelity", "--qubits", "1", "--m", "1", "--out", o],
        vec!["state-fidelity", "--qubits", "9", "--out", o],
        vec!["bounds-table", "--n", "1"],
        vec!["state-fidelity", "--bogus"],
    ];
    for args in cases {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"qubits": 1, "colour": "red"}"#).unwrap();
    assert_eq!(run(&["state-fidelity", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = tiny_state(&blocker.join("sub"), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
