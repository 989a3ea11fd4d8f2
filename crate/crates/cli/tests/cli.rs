use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn skewlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skewlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("SKEWLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const EIGHT: &str = "skewset 1\nambient torus 6\n0 0\n0 1\n2 0\n2 3\n3 1\n3 3\n3 5\n4 0\n";

#[test]
fn verify_free_set() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("set.txt"), EIGHT).unwrap();
    let out = skewlab(dir.path(), &["verify", "--in", "set.txt"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), r#"{"free": true}"#);
}

#[test]
fn verify_reports_witness() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.txt"), "skewset 1\nambient grid 2\n1 1\n1 2\n2 1\n").unwrap();
    let out = skewlab(dir.path(), &["verify", "--in", "c.txt", "--bi"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["free"], false);
    assert_eq!(v["witness"], serde_json::json!([[1, 1], [1, 2], [2, 1]]));
}

#[test]
fn fft_and_naive_counts_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("skewset 1\nambient torus 24\n");
    for x in 0..24 {
        for y in 0..24 {
            if (x * 7 + y * 13 + x * y) % 5 == 0 {
                text.push_str(&format!("{x} {y}\n"));
            }
        }
    }
    std::fs::write(dir.path().join("set.txt"), text).unwrap();
    let fft = skewlab(dir.path(), &["count", "--in", "set.txt", "--method", "fft", "--json"]);
    let naive = skewlab(dir.path(), &["count", "--in", "set.txt", "--method", "naive", "--json"]);
    assert_eq!(fft.status.code(), Some(0));
    let (f, n) = (json(&fft), json(&naive));
    for key in ["trivial", "nontrivial", "total", "lambda"] {
        assert_eq!(f[key], n[key], "{key}");
    }
    assert!(f["total"].as_u64().unwrap() > 0);
}

#[test]
fn construct_sphere_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let first = skewlab(dir.path(), &["construct", "sphere", "--n", "1024"]);
    assert_eq!(first.status.code(), Some(0));
    let file = dir.path().join("sphere-1024.skewset");
    let bytes = std::fs::read(&file).unwrap();
    let second = skewlab(dir.path(), &["construct", "sphere", "--n", "1024"]);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(bytes, std::fs::read(&file).unwrap());

    let verify = skewlab(dir.path(), &["verify", "--in", "sphere-1024.skewset"]);
    assert_eq!(json(&verify)["free"], true);
    assert_eq!(json(&first)["size"], 24);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(skewlab(dir.path(), &["verify", "--bogus"]).status.code(), Some(2));
    assert_eq!(skewlab(dir.path(), &["verify", "--in", "missing.txt"]).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.txt"), "skewset 1\nambient grid 2\n3 1\n").unwrap();
    assert_eq!(skewlab(dir.path(), &["verify", "--in", "bad.txt"]).status.code(), Some(2));
    assert_eq!(skewlab(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn search_writes_witness() {
    let dir = tempfile::tempdir().unwrap();
    let out = skewlab(
        dir.path(),
        &["--threads", "1", "search", "--ambient", "torus", "--size", "6", "--bi", "--set-out", "w.skewset"],
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["best_size"].as_u64().unwrap() >= 8);
    assert_eq!(v["optimal"], true);
    let verify = skewlab(dir.path(), &["verify", "--in", "w.skewset", "--bi"]);
    assert_eq!(json(&verify)["bi_free"], true);
}

#[test]
fn diagnose_and_increment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("set.txt"), EIGHT).unwrap();
    for check in ["gvn", "parseval", "lambda"] {
        let out = skewlab(dir.path(), &["diagnose", "--in", "set.txt", "--check", check]);
        assert_eq!(out.status.code(), Some(0), "{check}");
    }
    let lambda = json(&skewlab(dir.path(), &["diagnose", "--in", "set.txt", "--check", "lambda"]));
    assert_eq!(lambda["count"], 18);

    skewlab(dir.path(), &["construct", "sphere", "--n", "32", "--set-out", "s.skewset"]);
    let out = skewlab(dir.path(), &["increment", "--in", "s.skewset", "--mode", "best-effort", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["density"].as_f64().unwrap() >= v["input_density"].as_f64().unwrap());
    let d = json(&skewlab(dir.path(), &["diagnose", "--in", "s.skewset", "--check", "dichotomy"]));
    assert_eq!(d["branch"], "i");
    // dichotomy needs a grid
    assert_eq!(
        skewlab(dir.path(), &["diagnose", "--in", "set.txt", "--check", "dichotomy"]).status.code(),
        Some(2)
    );
}

#[test]
fn growth_csv_and_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let out = skewlab(dir.path(), &["--format", "csv", "growth", "--exps", "10..12"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,size,density,fitted_c,m,d,r,t,guaranteed");
    assert_eq!(lines.len(), 4);

    let args = ["experiment", "product-set", "--beta", "0.5", "--N", "16", "--trials", "3", "--seed", "4"];
    let a = skewlab(dir.path(), &args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, skewlab(dir.path(), &args).stdout);
    assert_eq!(json(&a)["N"], 16);
}
