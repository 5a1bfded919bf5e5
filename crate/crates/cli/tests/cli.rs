use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nelson-fk"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("NELSON_FK_THREADS")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn paths_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(bin(&["paths", "--n", "3", "--seed", "7"], &a).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_nelson-fk"))
        .args(["paths", "--n", "3", "--seed", "7", "--out"])
        .arg(&b)
        .env("NELSON_FK_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let x = fs::read(a.join("paths.csv")).unwrap();
    assert_eq!(x, fs::read(b.join("paths.csv")).unwrap());
    assert!(x.starts_with(b"path,s,dx,dy\n"));
    let m = manifest(&a);
    assert_eq!(m["command"], "paths");
    assert_eq!(m["status"], "pass");
    assert_eq!(m["outputs"][0]["name"], "paths.csv");
}

#[test]
fn validate_passes_on_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(&["validate"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("validate.json")).unwrap()).unwrap();
    let checks = doc["result"].as_array().unwrap();
    assert!(checks.len() >= 10);
    assert!(checks.iter().all(|c| c["pass"] == true));
}

#[test]
fn config_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[mc]\nn_path = 3\n").unwrap();
    let o = bin(&["-c", cfg.to_str().unwrap(), "semigroup"], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mc.n_path"));

    fs::write(&cfg, "[model]\nm_b = -1.0\n").unwrap();
    let o = bin(&["-c", cfg.to_str().unwrap(), "semigroup"], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(3));

    let o = bin(&["no-such-command"], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(3));
    let o = bin(&["--help"], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn compare_within_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(
        &cfg,
        "[model]\ng = 0.3\nlambda = 1.0\n[grid]\nradial = 16\nangular = 16\nr_max = 1.0\n[mc]\nn_paths = 20000\nseed = 11\nt = [1.0]\n",
    )
    .unwrap();
    let o = bin(&["-c", cfg.to_str().unwrap(), "compare"], &tmp.path().join("o"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!tmp.path().join("o/failure.json").exists());
    assert_eq!(manifest(&tmp.path().join("o"))["status"], "pass");
}

#[test]
fn budget_violation_exits_2() {
    // one-node path grid: quadrature error far outside the oracle budget
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("f.toml");
    fs::write(
        &cfg,
        "[model]\ng = 0.3\nlambda = 1.0\n[mc]\nn_paths = 5000\nt = [1.0]\n[grid]\nradial = 1\nangular = 1\norder = 1\nr_max = 1.0\n",
    )
    .unwrap();
    let out = tmp.path().join("o");
    let o = bin(&["-c", cfg.to_str().unwrap(), "compare"], &out);
    assert_eq!(o.status.code(), Some(2));
    let f: serde_json::Value = serde_json::from_slice(&fs::read(out.join("failure.json")).unwrap()).unwrap();
    assert_eq!(f["result"]["kind"], "numerical_budget");
    assert_eq!(manifest(&out)["status"], "numerical_budget_failure");
}
