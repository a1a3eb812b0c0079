use std::path::Path;
use std::process::Command;

fn kpp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kpp"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const MINIMAL: &str = r#"
experiment = "simulate"
horizon = 1.0
[reaction]
kind = "fisher"
[initial_data]
family = "algebraic"
alpha = 2.0
[numerics]
x_left = -10.0
x_right = 40.0
stride = 100
"#;

#[test]
fn simulate_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", MINIMAL);
    let out = dir.path().join("run");
    let status = kpp()
        .args(["--quiet", "simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(files.len() >= 3);
    for f in files {
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }

    let ls = kpp()
        .args(["levelsets", "--m", "0.5", "--t", "1", "--run"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(ls.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&ls.stdout).unwrap();
    assert!(v["rightmost"].as_f64().unwrap() > 0.0);
}

#[test]
fn huge_time_step_is_a_solver_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        &MINIMAL
            .replace("stride = 100", "stride = 1\ndt = 10.0")
            .replace("horizon = 1.0", "horizon = 20.0"),
    );
    let out = kpp()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stability"));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "experiment = \"simulate\"\nhorizon = -1\n[reaction]\nkind = \"fisher\"\n",
    );
    let out = kpp().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let unknown = write(dir.path(), "typo.toml", &MINIMAL.replace("stride", "strid"));
    assert_eq!(
        kpp()
            .args(["simulate", "--config"])
            .arg(&unknown)
            .status()
            .unwrap()
            .code(),
        Some(2)
    );
    assert_eq!(kpp().args(["bogus"]).status().unwrap().code(), Some(2));
}

#[test]
fn failed_verification_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // at T = 2 the spreading law is nowhere near its asymptotic regime
    let cfg = write(
        dir.path(),
        "v.toml",
        r#"
experiment = "hom_levelsets"
horizon = 2.0
levels = [0.5]
tolerance = 0.01
[reaction]
kind = "fisher"
[initial_data]
family = "algebraic"
alpha = 4.0
[numerics]
x_right = 60.0
stride = 100
"#,
    );
    let out = kpp()
        .args(["--quiet", "verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("v"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("v/report.json").exists());
}

#[test]
fn bmt_and_eigen_print_json() {
    let out = kpp()
        .args(["bmt", "--m", "0.5", "--T", "1.0986122886681098"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["B"].as_f64().unwrap() - 0.25).abs() < 1e-6);

    let out = kpp()
        .args([
            "eigen",
            "--reaction",
            "periodic-fisher",
            "--amplitude",
            "0.5",
            "--n",
            "256",
        ])
        .env("KPP_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["eigenvalue"].as_f64().unwrap() > 1.0);
    assert_eq!(v["nodes"].as_u64(), Some(256));
}
