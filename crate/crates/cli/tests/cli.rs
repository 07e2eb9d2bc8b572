use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_tailproc");

fn tailproc(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

/// Small budgets covering every stage.
const SMALL: &str = r#"
seed = 99
[model]
kind = "moving_maxima"
c = [1.0, 0.5]
alpha = 1.0
[certify]
samples = 5000
dissipativity_samples = 2000
[construct]
samples = 5000
[simulate]
horizon = 4000
replicates = 6
stationarity_lags = 10
block_length = 40
[indices]
samples = 5000
blocks_tolerance = 0.2
[estimate]
quantile = 0.98
min_count = 200
permutations = 49
max_samples = 500
hill_k = 100
"#;

#[test]
fn validate_lists_every_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[model]\nkind = \"armax\"\nphi = 0.5\nalpha = -1\n[simulate]\nhorizon = 0\n");
    let out = tailproc(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 4: model.alpha: alpha must be positive"), "{err}");
    assert!(err.contains("seed: seed is required"), "{err}");
    assert!(err.contains("line 6: simulate.horizon"), "{err}");
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let out = tailproc(&["validate", "--config", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}: {}", p.display(), String::from_utf8_lossy(&out.stderr));
        seen += 1;
    }
    assert!(seen >= 4);
}

#[test]
fn certify_iid_is_fast_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "iid.toml", "seed = 5\n[model]\nkind = \"iid\"\nalpha = 1.0\n");
    let out_dir = dir.path().join("out");
    let start = Instant::now();
    let out = tailproc(&["certify", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--json"]);
    assert!(start.elapsed() < Duration::from_secs(10));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["stages"], serde_json::json!(["certify"]));
    assert!(report["simulate"].is_null());
    assert_eq!(fs::read_to_string(out_dir.join("report.json")).unwrap().as_bytes(), out.stdout.as_slice());
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let mut reports = Vec::new();
    for workers in ["1", "3"] {
        let out_dir = dir.path().join(format!("w{workers}"));
        let out = tailproc(&["run-all", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--workers", workers]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        for f in ["paths.csv", "tail_law.csv", "indices.json"] {
            assert!(out_dir.join(f).exists(), "{f} missing");
        }
        reports.push((fs::read(out_dir.join("report.json")).unwrap(), fs::read(out_dir.join("paths.csv")).unwrap()));
    }
    assert!(reports[0] == reports[1], "outputs differ across worker counts");
}

#[test]
fn seed_override_changes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let run = |seed: &str| {
        let out = tailproc(&["construct", "--config", &cfg, "--out", dir.path().join(seed).to_str().unwrap(), "--seed", seed, "--json"]);
        assert!(out.status.success());
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()
    };
    let (a, b) = (run("1"), run("2"));
    assert_eq!(a["seed"], 1);
    assert_ne!(a["config_hash"], b["config_hash"]);
    assert_ne!(a["construct"], b["construct"]);
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL.replace("blocks_tolerance = 0.2", "blocks_tolerance = 1e-9");
    let cfg = write_config(dir.path(), "strict.toml", &body);
    let out = tailproc(&["indices", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("FAIL  indices/blocks_index"), "{err}");
}

#[test]
fn stage_errors_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    // one particle per shift cannot meet the certificate
    let body = SMALL.replace("block_length = 40", "block_length = 40\nn_per_shift = 1");
    let cfg = write_config(dir.path(), "thin.toml", &body);
    let out = tailproc(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("stage simulate") && err.contains("precondition"), "{err}");
}

#[test]
fn armax_default_budgets_recover_theta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "armax.toml", "seed = 2024\n[model]\nkind = \"armax\"\nphi = 0.5\nalpha = 1.0\n");
    let out = tailproc(&["run-all", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap(), "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let idx = &report["indices"];
    let tolerance = 0.01;
    for e in idx["maximal"].as_array().unwrap().iter().chain(idx["extremal"].as_array().unwrap()) {
        let tol = if e["method"] == "blocks-empirical" { 0.05 } else { tolerance };
        let v = e["value"].as_f64().unwrap();
        assert!((v - 0.5).abs() <= tol, "{}: {v}", e["method"]);
        assert!(e["se"].as_f64().unwrap() >= 0.0 && e["n"].as_u64().unwrap() > 0);
    }
}
