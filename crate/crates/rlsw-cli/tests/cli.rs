//! End-to-end CLI checks: exit codes, sidecars, and an estimate run on a
//! simulated white-noise ensemble whose corrected spectrum must recover
//! the flat dyadic shape.

use std::collections::HashMap;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rlsw")
}

#[test]
fn unknown_subcommand_exits_nonzero_with_usage() {
    let out = Command::new(bin()).arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("Usage") || text.contains("usage"), "{text}");
}

#[test]
fn unknown_flag_exits_nonzero() {
    let out = Command::new(bin())
        .args(["simulate", "--nope", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn estimate_on_white_noise_recovers_dyadic_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let ens = dir.path().join("wn.csv");
    let est = dir.path().join("est.csv");
    let run = |args: &[&str]| {
        let out = Command::new(bin()).args(args).output().unwrap();
        assert!(
            out.status.success(),
            "rlsw {:?}: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
    };
    run(&[
        "simulate", "--spec", "white_noise", "--sigma2", "1.0", "--seed", "3",
        "-R", "64", "-T", "256", "--family", "haar", "--out", &ens.display().to_string(),
    ]);
    run(&[
        "estimate", "--input", &ens.display().to_string(), "-M", "10",
        "--family", "haar", "--out", &est.display().to_string(),
    ]);

    // per-scale interior means of the corrected estimate
    let text = std::fs::read_to_string(&est).unwrap();
    let mut sums: HashMap<usize, (f64, u64)> = HashMap::new();
    for line in text.lines().skip(1) {
        let mut parts = line.split(',');
        let j: usize = parts.next().unwrap().parse().unwrap();
        let _k: usize = parts.next().unwrap().parse().unwrap();
        let r: usize = parts.next().unwrap().parse().unwrap();
        let v: f64 = parts.next().unwrap().parse().unwrap();
        if (10..54).contains(&r) {
            let e = sums.entry(j).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    for j in 1..=3usize {
        let (s, n) = sums[&j];
        let mean = s / n as f64;
        let target = 2f64.powi(-(j as i32));
        assert!(
            (mean - target).abs() < 0.10 * target,
            "scale {j}: interior mean {mean} vs {target}"
        );
    }

    // sidecar carries the full configuration
    let sidecar = std::fs::read_to_string(dir.path().join("est.csv.meta.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(doc["command"], "estimate");
    assert_eq!(doc["family"], "haar");
    assert_eq!(doc["M"], 10);
    assert!(doc["input_digest"].as_str().unwrap().len() == 64);
}

#[test]
fn coherence_pair_export_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let ens = dir.path().join("e.csv");
    let out_csv = dir.path().join("pair.csv");
    let run = |args: &[&str]| {
        let out = Command::new(bin()).args(args).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(&[
        "simulate", "--spec", "sim1", "--coherence", "constant07", "--seed", "11",
        "-R", "32", "-T", "64", "--family", "daub-la", "--vanishing-moments", "4",
        "--out", &ens.display().to_string(),
    ]);
    run(&[
        "coherence", "--input", &ens.display().to_string(), "-M", "3",
        "--level", "4", "--reference", "5", "--pair", "9",
        "--family", "daub-la", "--vanishing-moments", "4",
        "--normalization", "periodogram-level",
        "--out", &out_csv.display().to_string(),
    ]);
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "time_index,value");
    assert_eq!(lines.len(), 65);
    // defined values are inside the unit interval for this normalization
    for line in &lines[1..] {
        let v = line.split(',').nth(1).unwrap();
        if v != "NA" {
            let x: f64 = v.parse().unwrap();
            assert!(x.abs() <= 1.0);
        }
    }
}
