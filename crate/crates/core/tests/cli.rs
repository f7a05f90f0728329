use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cachechan"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("noiseless_2mb.toml");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = run(&[
            "simulate",
            "--config",
            path_str(&cfg),
            "--out",
            path_str(out),
            "--seed",
            "11",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let summary = String::from_utf8(o.stdout).unwrap();
        assert!(summary.contains("ber=0.0000"), "{summary}");
        assert!(summary.contains("throughput=2.27"), "{summary}");
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn sweep_csv_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("reference_sweep.toml");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["sweep", "--config", path_str(&cfg), "--out", path_str(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 7);
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 9);
        assert_eq!(cols[8], "0.0000");
    }
}

#[test]
fn theory_matches_reference_totals() {
    let cfg = configs().join("reference_sweep.toml");
    let o = run(&["theory", "--config", path_str(&cfg)]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let expected = [12.498, 24.523, 48.514, 97.055, 194.762, 385.866];
    let totals: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    assert_eq!(totals.len(), 6);
    for (got, want) in totals.iter().zip(expected) {
        assert!((got - want).abs() / want <= 0.02, "{got} vs {want}");
    }
}

#[test]
fn json_lines_format() {
    let cfg = configs().join("reference_sweep.toml");
    let o = run(&[
        "theory",
        "--config",
        path_str(&cfg),
        "--format",
        "json-lines",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["theor_total"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn empty_cache_sizes_is_an_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("empty.toml");
    std::fs::write(
        &cfg,
        "cache_sizes_mb = []\n[message]\nones = 1\nzeros = 1\n",
    )
    .unwrap();
    let o = run(&["sweep", "--config", path_str(&cfg)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("cache_sizes_mb"));
}

#[test]
fn unknown_key_reports_location() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "variant = \"basic\"\nbogus = 1\n[message]\nbits = \"10\"\n",
    )
    .unwrap();
    let o = run(&["simulate", "--config", path_str(&cfg)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn unwritable_output_fails() {
    let cfg = configs().join("noiseless_2mb.toml");
    let o = run(&[
        "simulate",
        "--config",
        path_str(&cfg),
        "--out",
        "/nonexistent/dir/trace.json",
    ]);
    assert!(!o.status.success());
}

#[test]
fn disrupt_reports_both_bers() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("cmp.json");
    let cfg = configs().join("disrupt_basic.toml");
    let o = run(&[
        "disrupt",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line = String::from_utf8(o.stdout).unwrap();
    assert!(line.contains("coding=none"), "{line}");
    assert!(line.contains("coding=repetition3 ber=0.0000"), "{line}");
    assert!(!line.contains("coding=none ber=0.0000"), "{line}");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert!(v["uncoded"]["metrics"]["ber"].as_f64().unwrap() > 0.0);
}

#[test]
fn disrupt_without_disruptor_fails() {
    let cfg = configs().join("noiseless_2mb.toml");
    let o = run(&["disrupt", "--config", path_str(&cfg)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("disruptor"));
}
