use std::path::{Path, PathBuf};
use std::process::Command;

fn qkopt(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_qkopt")).args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "qkopt {args:?} failed:\n{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).to_string_lossy().into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn run_baseline_compare_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config("one_dof.toml");
    qkopt(&["run", "--config", &cfg, "--out", out]);
    qkopt(&["baseline", "--config", &cfg, "--out", out]);
    qkopt(&["compare", "--config", &cfg, "--out", out]);

    assert!(read(dir.path(), "trace.csv").starts_with("iteration,cost\n"));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "report.json")).unwrap();
    assert_eq!(report["accepted"], true);
    assert_eq!(report["exhaustive_evaluations"], 1024);

    let comparison = read(dir.path(), "comparison.csv");
    let methods: Vec<&str> = comparison.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["grover", "nelder_mead", "quasi_newton", "pso", "exhaustive"]);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    qkopt(&["run", "--case", "two_dof", "--qubits-per-param", "3", "--seed", "4", "--shots", "200", "--out", out]);
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "report.json")).unwrap();
    assert_eq!(report["seed"], 4);
    assert_eq!(report["search"]["shots"], 200);
    assert_eq!(report["resolution"]["dimension"], 4096);
}

#[test]
fn train_then_surrogate_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let text = "case = \"one_dof\"\nmode = \"surrogate\"\n[qml]\nepochs = 20\n";
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, text).unwrap();
    let cfg = cfg.to_str().unwrap();
    qkopt(&["train", "--config", cfg, "--qubits-per-param", "3", "--out", out]);
    assert_eq!(read(dir.path(), "training_loss.csv").lines().count(), 22);
    let params = read(dir.path(), "surrogate.params");

    let run_dir = dir.path().join("run");
    qkopt(&["run", "--config", cfg, "--qubits-per-param", "3", "--out", run_dir.to_str().unwrap()]);
    assert_eq!(read(&run_dir, "surrogate.params"), params);
}

#[test]
fn sweep_writes_one_row_per_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    qkopt(&["sweep", "--case", "one_dof", "--qubits", "2,3", "--out", out]);
    assert_eq!(read(dir.path(), "sweep.csv").lines().count(), 3);
}

#[test]
fn bad_input_fails_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_qkopt")).args(["run", "--mode", "quantum"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown mode"));

    let out = Command::new(env!("CARGO_BIN_EXE_qkopt"))
        .args(["run", "--case", "dual_arm", "--qubits-per-param", "9", "--out", "unused"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("capacity"));
}
