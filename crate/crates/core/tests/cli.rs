use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jacobi-corners"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn sample_writes_the_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"samples": 50, "ensemble": {"m": 2, "n": 4}}"#).unwrap();
    let out = run(&["sample", "--seed", "3", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let csv = read(&dir.path().join("samples.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sample_id,level,index,value"));
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (level, index): (usize, usize) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        let x: f64 = f[3].parse().unwrap();
        assert!(level <= 4 && index >= 1 && index <= level.min(2));
        assert!((0.0..=1.0).contains(&x));
        rows += 1;
    }
    // levels 1..4 hold 1, 2, 2, 2 particles
    assert_eq!(rows, 50 * 7);
    let meta: serde_json::Value = serde_json::from_str(&read(&dir.path().join("metadata.json"))).unwrap();
    assert_eq!(meta["seed"], 3);
}

#[test]
fn json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("csv"), dir.path().join("json"));
    assert!(run(&["moments", "--seed", "1"], &a).status.success());
    assert!(run(&["moments", "--seed", "1", "--format", "json"], &b).status.success());
    let csv = read(&a.join("moments.csv"));
    let json: Vec<serde_json::Value> = serde_json::from_str(&read(&b.join("moments.json"))).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        header,
        ["observable", "level", "degree", "exact_value", "mc_mean", "mc_se", "z_score"]
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), json.len());
    for (line, obj) in rows.iter().zip(&json) {
        for (h, cell) in header.iter().zip(line.split(',')) {
            match &obj[*h] {
                serde_json::Value::String(s) => assert_eq!(s, cell),
                v => assert_eq!(v.as_f64().unwrap(), cell.parse::<f64>().unwrap(), "{h}"),
            }
        }
    }
    // level one reproduces α/(α+M) with the defaults α = 1, M = 2
    let first: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(&first[..3], ["mean_p", "1", "1"]);
    assert_eq!(first[3].parse::<f64>().unwrap(), 1.0 / 3.0);
}

#[test]
fn asymptotics_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["asymptotics"], dir.path()).status.success());
    for i in 0..3 {
        let csv = read(&dir.path().join(format!("frozen_boundary_{i}.csv")));
        assert_eq!(csv.lines().next(), Some("n_hat,l,r"));
    }
    let checks = read(&dir.path().join("checks.csv"));
    assert!(checks.lines().any(|l| l.starts_with("asymptotics.diagonal(1),")));
    assert!(checks.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn failing_check_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.json");
    std::fs::write(&cfg, r#"{"ho": {"thetas": [0.5], "tolerance": 0.0}}"#).unwrap();
    let out = run(&["ho", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
    let ok = run(&["ho"], &dir.path().join("p"));
    assert_eq!(ok.status.code(), Some(0));
    let roots = run(&["beta-infinity"], &dir.path().join("b"));
    assert_eq!(roots.status.code(), Some(0));
    let csv = read(&dir.path().join("b").join("roots.csv"));
    let mut prev: Option<(usize, f64)> = None;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (level, x): (usize, f64) = (f[0].parse().unwrap(), f[2].parse().unwrap());
        if let Some((l, y)) = prev {
            assert!(l != level || y < x);
        }
        prev = Some((level, x));
    }
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"ensemble": {"theta": [1, 0]}}"#).unwrap();
    let out = run(&["moments", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta"));
    let missing = run(&["moments", "--config", "/nonexistent/run.json"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/run.json"));
}

#[test]
fn help_lists_every_flag() {
    let out = Command::new(env!("CARGO_BIN_EXE_jacobi-corners")).arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--seed", "--config", "--out", "--format", "--threads", "JACOBI_CORNERS_THREADS"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
    for cmd in ["sample", "moments", "asymptotics", "beta-infinity", "ho", "all-checks"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}
