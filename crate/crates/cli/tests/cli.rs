use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn couette(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_couette")).args(args).current_dir(dir).output().unwrap()
}

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn kl2_identity_report() {
    let d = tempfile::tempdir().unwrap();
    let v = json(&couette(&["verify-linear", "--lemma", "kL2", "--k", "3", "--l", "4"], d.path()));
    let exact = 3.0 * std::f64::consts::PI / 5.0;
    assert!((v["exact"].as_f64().unwrap() - exact).abs() < 1e-15);
    assert!(v["rel_err"].as_f64().unwrap() < 1e-8);
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn validation_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let o = couette(&["simulate", "x.toml", "--frobnicate"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(couette(&["verify-bilinear", "--lemma", "9.9"], d.path()).status.code(), Some(2));
    assert_eq!(couette(&["norms", "missing.csv", "--nu", "0.01"], d.path()).status.code(), Some(2));
    std::fs::write(d.path().join("bad.toml"), "[domain]\nnx = 5\nny = 8\nnz = 8\nnu = 0.01\n[time]\nt_end = 2\n[initial_condition]\nkind = \"zero\"\n").unwrap();
    assert_eq!(couette(&["simulate", "bad.toml"], d.path()).status.code(), Some(2));
}

#[test]
fn cfl_violation_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let cfg = std::fs::read_to_string(fixture("small_random.toml")).unwrap().replace("amplitude = 0.001", "amplitude = 100.0")
        + "";
    let cfg = cfg.replace("record_every = 0.1", "record_every = 0.1\ndt = 0.1");
    std::fs::write(d.path().join("c.toml"), cfg).unwrap();
    let o = couette(&["simulate", "c.toml"], d.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn zero_initial_condition_gives_zero_record() {
    let d = tempfile::tempdir().unwrap();
    let cfg = std::fs::read_to_string(fixture("small_random.toml")).unwrap().replace("kind = \"random\"", "kind = \"zero\"");
    std::fs::write(d.path().join("z.toml"), cfg).unwrap();
    let v = json(&couette(&["simulate", "z.toml"], d.path()));
    assert_eq!(v["outcome"], "completed");
    let text = std::fs::read_to_string(d.path().join("z.record.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let skip: Vec<usize> =
        header.iter().enumerate().filter(|(_, h)| ["shear_phase", "coeff_valid"].contains(h)).map(|(i, _)| i).collect();
    for line in lines {
        for (i, x) in line.split(',').enumerate().skip(1) {
            if !skip.contains(&i) {
                assert_eq!(x.parse::<f64>().unwrap(), 0.0, "{}", header[i]);
            }
        }
    }
    assert!(d.path().join("z.record.csv.manifest.json").exists());
}

#[test]
fn outputs_are_byte_identical_for_fixed_seed() {
    let d = tempfile::tempdir().unwrap();
    let cfg = fixture("small_random.toml");
    for (i, out) in ["a.csv", "b.csv"].iter().enumerate() {
        let o = couette(&["--threads", "1", "--output", "csv", "simulate", &cfg, "--record", out], d.path());
        assert!(o.status.success());
        std::fs::write(d.path().join(format!("stdout{i}")), &o.stdout).unwrap();
    }
    let read = |p: &str| std::fs::read(d.path().join(p)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    let strip = |b: Vec<u8>| String::from_utf8(b).unwrap().lines().filter(|l| !l.starts_with("record,")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(read("stdout0")), strip(read("stdout1")));
    let o = couette(&["--seed", "5", "simulate", &cfg, "--record", "c.csv"], d.path());
    assert!(o.status.success());
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn checkpoint_resume_matches_uninterrupted_run() {
    let d = tempfile::tempdir().unwrap();
    let full = fixture("small_random.toml");
    let half = std::fs::read_to_string(&full).unwrap().replace("t_end = 2.0", "t_end = 1.5");
    std::fs::write(d.path().join("half.toml"), half).unwrap();
    json(&couette(&["simulate", &full, "--record", "full.csv"], d.path()));
    json(&couette(&["simulate", "half.toml", "--record", "half.csv", "--checkpoint", "mid.ck"], d.path()));
    let info = json(&couette(&["checkpoint", "info", "mid.ck"], d.path()));
    assert_eq!(info["time"].as_f64().unwrap(), 1.5);
    json(&couette(&["checkpoint", "resume", "mid.ck", "--config", &full, "--record", "rest.csv"], d.path()));
    let load = |p: &str| -> Vec<Vec<f64>> {
        std::fs::read_to_string(d.path().join(p))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect()
    };
    let (a, b) = (load("full.csv"), load("rest.csv"));
    let tail = &a[a.len() - b.len()..];
    for (x, y) in tail.iter().zip(&b) {
        for (p, q) in x.iter().zip(y) {
            assert_eq!(p.to_bits(), q.to_bits(), "{p} vs {q}");
        }
    }
}

#[test]
fn mock_threshold_fixture_recovers_beta() {
    let d = tempfile::tempdir().unwrap();
    let v = json(&couette(&["threshold", &fixture("mock_threshold.toml"), "--report", "r.json"], d.path()));
    let beta = v["beta"]["exponent"].as_f64().unwrap();
    assert!((beta - 1.0).abs() <= 0.01, "{beta}");
    assert_eq!(v["monotone"], true);
    assert!(d.path().join("r.json").exists());
}

#[test]
fn norms_functional_from_saved_record() {
    let d = tempfile::tempdir().unwrap();
    json(&couette(&["simulate", &fixture("small_random.toml"), "--record", "r.csv"], d.path()));
    let all = json(&couette(&["norms", "r.csv"], d.path()));
    let e2 = json(&couette(&["norms", "r.csv", "--functional", "E2"], d.path()));
    assert_eq!(all["e2"], e2["value"]);
    assert_eq!(couette(&["norms", "r.csv", "--functional", "E9"], d.path()).status.code(), Some(2));
    let csv = couette(&["--output", "csv", "norms", "r.csv"], d.path());
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("key,value\n"));
}
