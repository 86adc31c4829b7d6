//! End-to-end tests of the `nlforms` binary: exit codes, artifact layout,
//! and byte reproducibility.

use std::path::Path;
use std::process::Command;

fn nlforms() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlforms"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_BBM: &str = r#"
spec_version = 1
kind = "bbm_limit"
name = "bbm_small"
seed = 3

[domain]
n = 8
r_trunc = 2.0

[domain.geometry]
shape = "interval"
a = 0.0
b = 1.0

[kernel]
kind = "nu"
d = 1

[tolerances]
quad_tol = 1e-6
"#;

#[test]
fn run_writes_artifacts_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bbm.toml", SMALL_BBM);
    let out_dir = tmp.path().join("out");
    let status = nlforms()
        .args(["run"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out_dir.join("bbm_small.csv")).unwrap();
    assert!(csv.starts_with("alpha,value,error_estimate,local_energy,gap\n"));
    assert_eq!(csv.lines().count(), 5);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("bbm_small.summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["kind"], "bbm_limit");
    assert!(summary["assertions"].as_array().unwrap().len() >= 4);
}

#[test]
fn violator_check_exits_one_with_witness() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "violator.toml",
        r#"
spec_version = 1
kind = "check_kernel"
name = "violator"

[kernel]
kind = "violator"
d = 1
"#,
    );
    let out_dir = tmp.path().join("out");
    let output = nlforms()
        .args(["run"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("violator.summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["pass"], false);
    // witness coordinates of the failing comparison samples are recorded
    let detail = summary["assertions"][0]["detail"].as_str().unwrap();
    assert!(detail.contains("h = ["), "missing witness: {detail}");
}

#[test]
fn malformed_config_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "kind = \"wat\"\n");
    let status = nlforms().args(["run"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));
    // nonexistent path is also a config error
    let status = nlforms()
        .args(["run", "/nonexistent/nlforms.toml"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bbm.toml", SMALL_BBM);
    let mut artifacts = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = tmp.path().join(sub);
        let status = nlforms()
            .args(["run"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .arg("--jobs")
            .arg(if sub == "a" { "1" } else { "2" })
            .status()
            .unwrap();
        assert!(status.success());
        artifacts.push(std::fs::read(out_dir.join("bbm_small.csv")).unwrap());
    }
    assert_eq!(artifacts[0], artifacts[1], "CSV bytes differ between runs");
}

#[test]
fn catalog_is_stable_and_complete() {
    let a = nlforms().arg("catalog").output().unwrap();
    let b = nlforms().arg("catalog").output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    for id in [
        "power_law",
        "bounded_poly",
        "log_annulus",
        "shifted_power",
        "shifted_critical",
        "shifted_ratio",
        "profile",
        "j1",
        "j2",
        "j3",
        "j4",
        "nu",
        "perturbed",
    ] {
        assert!(text.contains(id), "catalog missing {id}");
    }
}

#[test]
fn validate_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_config(tmp.path(), "good.toml", SMALL_BBM);
    assert!(nlforms().args(["validate"]).arg(&good).status().unwrap().success());
    let bad = write_config(tmp.path(), "bad.toml", "spec_version = 1\n");
    assert_eq!(
        nlforms().args(["validate"]).arg(&bad).status().unwrap().code(),
        Some(2)
    );
}

#[test]
fn seed_override_changes_seeded_kernels() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "perturbed.toml",
        r#"
spec_version = 1
kind = "diffusion_matrix"
name = "perturbed"
seed = 1
alpha_sweep = [1.5, 1.9, 1.99, 1.999, 1.9999, 1.99999, 1.999999, 1.9999999]

[kernel]
kind = "perturbed"
d = 2
lambda = 2.0

[params]
delta = 0.5
"#,
    );
    let mut csvs = Vec::new();
    for (sub, seed) in [("a", "1"), ("b", "9")] {
        let out_dir = tmp.path().join(sub);
        let status = nlforms()
            .args(["run"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .args(["--seed", seed])
            .status()
            .unwrap();
        assert!(status.success());
        csvs.push(std::fs::read(out_dir.join("perturbed.csv")).unwrap());
    }
    assert_ne!(csvs[0], csvs[1], "different seeds must modulate differently");
}
