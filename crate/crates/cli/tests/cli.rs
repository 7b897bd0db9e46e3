use std::path::Path;
use std::process::{Command, Output};

fn surfspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfspec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn body(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("# "))
        .collect::<Vec<_>>()
        .join("\n")
}

fn header_value(path: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let line = text
        .lines()
        .find(|l| l.starts_with(&format!("# {key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {}", path.display()));
    line[key.len() + 4..].to_string()
}

/// Rows of a CSV as string cells, header row dropped.
fn rows(path: &Path) -> Vec<Vec<String>> {
    body(path)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn equilateral_torus_spectrum_matches_lattice_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = surfspec(&["spectrum", "--surface", "flat-torus:equilateral", "--k", "6", "--out", arg(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = dir.path().join("spectrum.csv");
    let r = rows(&csv);
    assert_eq!(r.len(), 6);
    let value: f64 = r[1][2].parse().unwrap();
    let exact = 8.0 * std::f64::consts::PI.powi(2) / 3f64.sqrt();
    assert!((value - exact).abs() / exact < 5e-3, "{value} vs {exact}");
    assert_eq!(header_value(&csv, "config_hash").len(), 64);
    assert!(header_value(&csv, "units").contains("eigenvalue [1/length^2]"));

    // the whitespace table carries the same numbers
    let dat = std::fs::read_to_string(dir.path().join("spectrum.dat")).unwrap();
    let line = dat.lines().find(|l| l.starts_with("1 ")).unwrap();
    assert_eq!(line.split(' ').nth(2).unwrap(), r[1][2]);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = arg(dir.path());
    for args in [
        vec!["spectrum", "--k", "abc"],
        vec!["spectrum", "--surface", "donut", "--out", out],
        vec!["sweep", "--out", out],
        vec!["sweep", "--attach", "cross-cap", "--surface", "rp2", "--out", out],
        vec!["spectrum", "--eps", "0.1:0.2", "--out", out],
        vec!["verify", "--only", "12", "--out", out],
        vec!["frobnicate"],
    ] {
        let o = surfspec(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"surface": "sphere", "colour": 3}"#).unwrap();
    let o = surfspec(&["spectrum", "--config", arg(&bad), "--out", out]);
    assert_eq!(code(&o), 2);
}

#[test]
fn reruns_give_identical_bodies() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = surfspec(&["spectrum", "--surface", "klein:1,0.7", "--res", "24", "--k", "8", "--out", arg(d.path())]);
        assert_eq!(code(&o), 0);
    }
    for f in ["spectrum.csv", "spectrum.dat"] {
        assert_eq!(body(&a.path().join(f)), body(&b.path().join(f)), "{f}");
        assert_eq!(
            header_value(&a.path().join(f), "config_hash"),
            header_value(&b.path().join(f), "config_hash")
        );
    }
    // the output directory is not part of the hash, and JSON has no timestamp
    assert_eq!(
        std::fs::read(a.path().join("spectrum.json")).unwrap(),
        std::fs::read(b.path().join("spectrum.json")).unwrap()
    );
}

#[test]
fn flags_override_config_file_and_run_json_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"surface": "sphere", "k": 4, "res": 8, "tol": 1e-9}"#).unwrap();
    let out1 = dir.path().join("one");
    let o = surfspec(&["spectrum", "--config", arg(&cfg), "--k", "5", "--out", arg(&out1)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out1.join("spectrum.json"));
    assert_eq!(report["config"]["surface"], "sphere");
    assert_eq!(report["config"]["k"], 5);
    assert_eq!(report["config"]["res"], 8);
    assert_eq!(report["config"]["tol"], 1e-9);
    assert_eq!(rows(&out1.join("spectrum.csv")).len(), 5);
    // round sphere: lambda_1 = 2 with multiplicity 3
    assert_eq!(report["result"]["lambda1_multiplicity"], 3);

    let out2 = dir.path().join("two");
    let o = surfspec(&["spectrum", "--config", arg(&out1.join("run.json")), "--out", arg(&out2)]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        json(&out2.join("spectrum.json"))["config_hash"],
        report["config_hash"]
    );
    assert_eq!(body(&out1.join("spectrum.csv")), body(&out2.join("spectrum.csv")));
}

#[test]
fn sweep_writes_one_row_per_point_and_index() {
    let dir = tempfile::tempdir().unwrap();
    let o = surfspec(&[
        "sweep", "--attach", "cross-cap", "--res", "16", "--eps", "0.08,0.04", "--h", "0.2:0.3:2", "--k", "3",
        "--jobs", "1", "--out", arg(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&dir.path().join("sweep.csv"));
    assert_eq!(r.len(), 2 * 2 * 4);
    assert!(r.iter().all(|row| row.len() == 8 && row[7] == "ok"));
    let result = &json(&dir.path().join("sweep.json"))["result"];
    assert_eq!(result["grid"].as_array().unwrap().len(), 4);
}

#[test]
fn missed_crossing_is_a_check_failure() {
    // at this resolution the surgered eigenvalue never meets the base pair
    let dir = tempfile::tempdir().unwrap();
    let o = surfspec(&["heightscan", "--attach", "cross-cap", "--res", "16", "--grid", "5", "--out", arg(dir.path())]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let scan = &json(&dir.path().join("heightscan.json"))["result"];
    assert_eq!(scan["status"], "NOT_CROSSED");
    assert!(dir.path().join("heightscan.dat").exists());
}

#[test]
fn maximize_checkpoints_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let out = arg(dir.path());
    let base = ["maximize", "--surface", "flat-torus:equilateral", "--res", "15", "--out", out];
    let o = surfspec(&[&base[..], &["--iterations", "4"]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["maximizer.json", "maximizer.frame.bin", "trajectory.csv", "trajectory.dat", "maximize.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let first = json(&dir.path().join("maximize.json"))["result"]["value"].as_f64().unwrap();
    let o = surfspec(&[&base[..], &["--iterations", "2", "--resume"]].concat());
    assert_eq!(code(&o), 0);
    let second = json(&dir.path().join("maximize.json"))["result"]["value"].as_f64().unwrap();
    assert!(second >= first, "{second} < {first}");

    let empty = tempfile::tempdir().unwrap();
    let o = surfspec(&["maximize", "--resume", "--res", "15", "--out", arg(empty.path())]);
    assert_eq!(code(&o), 3, "missing checkpoint is a run failure");
}

#[test]
fn verify_subset_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = surfspec(&["verify", "--suite", "paper", "--only", "2", "--out", arg(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("criterion 2 2_model_modes: PASS"), "{stdout}");
    let manifest = &json(&dir.path().join("verify.json"))["result"];
    assert_eq!(manifest["suite"], "paper");
    assert_eq!(manifest["checks"].as_object().unwrap().len(), 1);

    let o = surfspec(&["verify", "--suite", "nope", "--out", arg(dir.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn mesh_round_trips_through_file_surface() {
    let dir = tempfile::tempdir().unwrap();
    let o = surfspec(&[
        "mesh", "--surface", "flat-torus:square", "--attach", "handle", "--res", "24", "--eps", "0.03", "--h", "0.3",
        "--out", arg(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = &json(&dir.path().join("mesh.summary.json"))["result"];
    assert_eq!(summary["euler_characteristic"], -2);
    assert_eq!(summary["orientable"], true);

    let file = format!("file:{}", dir.path().join("mesh.json").display());
    let out = dir.path().join("spec");
    let o = surfspec(&["spectrum", "--surface", &file, "--k", "4", "--out", arg(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let area: f64 = header_value(&out.join("spectrum.csv"), "area").parse().unwrap();
    assert!(area > 1.0, "handle adds area: {area}");
}
