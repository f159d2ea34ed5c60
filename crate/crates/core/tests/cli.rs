use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kuramoto_core::cli::parse_config;
use kuramoto_core::observables::global_order;

fn kuramoto(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kuramoto"))
        .args(args)
        .env_remove("KURAMOTO_OUT_DIR")
        .output()
        .expect("spawn kuramoto")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const BOX: &str = r#"{
  "seed": 11,
  "model": {"n": 6, "kappa": 1.5, "mass": 0.5},
  "init": {"box": {"theta": [-1, 1], "omega": [-0.2, 0.2], "center_omega": true}},
  "integrator": {"dt": 0.01, "t_final": 5, "sample_every": 5}
}"#;

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "box.json", BOX);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = kuramoto(&["run", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["trajectory.csv", "summary.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let hash = report(&a)["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    assert_eq!(report(&b)["config_hash"], hash.as_str());

    let check = kuramoto(&["check", &cfg]);
    assert_eq!(code(&check), 0);
    let v: serde_json::Value = serde_json::from_slice(&check.stdout).unwrap();
    assert_eq!(v["config_hash"], hash.as_str());

    // An override changes the resolved config and therefore the hash.
    let c = kuramoto(&["check", &cfg, "--seed", "12"]);
    let v: serde_json::Value = serde_json::from_slice(&c.stdout).unwrap();
    assert_ne!(v["config_hash"], hash.as_str());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    assert_eq!(code(&kuramoto(&["--help"])), 0);
    assert_eq!(code(&kuramoto(&["frobnicate"])), 1);
    assert_eq!(code(&kuramoto(&["run", "/nonexistent/config.json"])), 1);

    let bad = write(dir.path(), "bad.json", r#"{"model": {"n": 3, "kappa": 1, "colour": 2}}"#);
    let o = kuramoto(&["run", &bad, "--out", out]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let asym = write(
        dir.path(),
        "asym.json",
        r#"{"model": {"n": 2, "kappa": 1, "capacity": {"matrix": [[0, 1], [2, 0]]}}}"#,
    );
    assert_eq!(code(&kuramoto(&["check", &asym])), 1);

    let unseeded = BOX.replace("\"seed\": 11,", "");
    let unseeded = write(dir.path(), "unseeded.json", &unseeded);
    assert_eq!(code(&kuramoto(&["check", &unseeded])), 1);
    assert_eq!(code(&kuramoto(&["check", &unseeded, "--seed", "3"])), 0);

    let violating = write(
        dir.path(),
        "violating.json",
        r#"{"model": {"n": 4, "kappa": 1, "mass": 0.01},
            "analyses": {"monitors": ["support_bound"]},
            "integrator": {"dt": 0.001, "t_final": 0.5, "sample_every": 50}}"#,
    );
    assert_eq!(code(&kuramoto(&["run", &violating, "--out", out])), 2);
    let r = report(Path::new(out));
    assert_eq!(r["bound_violations"][0]["monitor"], "support_bound");
    assert!(r["bound_violations"][0]["first_violation_time"].as_f64().unwrap() > 0.0);
}

#[test]
fn kappa_sweep_flips_at_threshold() {
    let theta = [0.0, 0.3, -0.4, 0.8];
    let omega = [0.1, -0.05, 0.2, -0.25];
    let m = 0.5;
    let r = global_order(&theta).unwrap().r_p;
    let kappa_star = m / 4.0 * omega.iter().map(|w| w * w).sum::<f64>() / (r * r);
    let values = [1.5, 0.9, 1.001, 0.999].map(|f| f * kappa_star);

    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"model": {{"n": 4, "kappa": 1, "mass": {m}}},
            "init": {{"explicit": {{"theta": {theta:?}, "omega": {omega:?}}}}},
            "integrator": {{"dt": 0.01, "t_final": 1, "sample_every": 10}},
            "experiment": {{"kind": "sweep", "parameter": "kappa", "values": {values:?}}}}}"#
    );
    let cfg = write(dir.path(), "sweep.json", &cfg);
    let o = kuramoto(&["sweep", &cfg, "--out", dir.path().to_str().unwrap(), "--workers", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "T34").unwrap();
    let rows: Vec<(f64, String)> = lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            (cells[1].parse().unwrap(), cells[col].to_string())
        })
        .collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[0].0 < w[1].0), "rows sorted by value");
    let flags: Vec<&str> = rows.iter().map(|r| r.1.as_str()).collect();
    assert_eq!(flags, ["unsatisfied", "unsatisfied", "satisfied", "satisfied"]);
}

#[test]
fn splay_stays_incoherent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "splay.json",
        r#"{"model": {"n": 8, "kappa": 0.5, "mass": 0.5}, "init": "splay",
            "integrator": {"dt": 0.01, "t_final": 20, "sample_every": 10}}"#,
    );
    let o = kuramoto(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let col = lines.next().unwrap().split(',').position(|h| h == "R_p").unwrap();
    for l in lines {
        let r: f64 = l.split(',').nth(col).unwrap().parse().unwrap();
        assert!(r <= 1e-8, "R_p = {r}");
    }
    assert_eq!(report(dir.path())["classification"]["kind"], "ZeroOrderParameter");
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model": {"n": 2, "kappa": 1}, "integrator": {"dt": 0.1, "t_final": 1}}"#,
    );
    let o = Command::new(env!("CARGO_BIN_EXE_kuramoto"))
        .args(["run", &cfg])
        .env("KURAMOTO_OUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("report.json").exists());
}

#[test]
fn w2_between_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "theta,omega\n0,0\n1,0\n");
    let b = write(dir.path(), "b.csv", "theta,omega\n0.5,0\n1.5,0\n");
    let o = kuramoto(&["w2", &a, &b]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let text = v.to_string();
    assert!(text.contains("0.5"), "{text}");
}

#[test]
fn homogeneous_sync_scenario() {
    // κ = 4κ* for the sampled data, as in the homogeneous acceptance scenario.
    let base = r#"{"seed": 20240601,
        "model": {"n": 16, "kappa": 1, "mass": 0.5},
        "init": {"box": {"theta": [-1, 1], "omega": [-0.2, 0.2], "center_omega": true}},
        "integrator": {"dt": 0.001, "t_final": 400, "sample_every": 1000}}"#;
    let resolved = parse_config(base).unwrap().resolve().unwrap();
    let init = &resolved.init;
    let r = global_order(init.theta()).unwrap().r_p;
    let kappa = 4.0 * 0.5 / 16.0 * init.omega().iter().map(|w| w * w).sum::<f64>() / (r * r);

    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s1.json", &base.replace("\"kappa\": 1", &format!("\"kappa\": {kappa:?}")));
    let o = kuramoto(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = report(dir.path());
    let t34 = rep["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["theorem"] == "T34")
        .unwrap();
    assert_eq!(t34["satisfied"], true);
    assert!(rep["sync_time"].as_f64().is_some());
    let kind = rep["classification"]["kind"].as_str().unwrap();
    assert!(kind == "OnePointCluster" || kind == "Bipolar", "{kind}");
    assert_eq!(rep["bound_violations"].as_array().unwrap().len(), 0);
}
