use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cornerlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cornerlab")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("one JSON object")
}

#[test]
fn empty_set_has_no_corners() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "empty.txt", "N 7\n");
    let out = cornerlab(&["corners", "count", "--mode", "grid", "--in", &input]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["count"], 0);
    assert!(v["witness"].is_null());
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn counts_a_single_corner_in_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "l.txt", "N 5\n0 0\n2 0\n0 2\n");
    for mode in ["grid", "cyclic"] {
        let v = json(&cornerlab(&["corners", "count", "--mode", mode, "--in", &input]));
        assert_eq!(v["count"], 1, "{mode}");
        assert_eq!(v["witness"]["d"], 2);
    }
}

#[test]
fn embed_rejects_modulus_not_divisible_by_three() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "a1.txt", "N 4\n0\n1\n3\n");
    let out = cornerlab(&["corners", "embed", "--in", &input, "--N", "13"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("multiple of 3"));
}

#[test]
fn embed_produces_corner_free_set() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "a1.txt", "N 4\n0\n1\n3\n");
    let out = cornerlab(&["corners", "embed", "--in", &input, "--N", "12"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!((v["count"].as_u64(), v["size"].as_u64()), (Some(0), Some(12)));
}

#[test]
fn behrend_writes_a_progression_free_literal() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.txt");
    let out = cornerlab(&["corners", "behrend", "--k", "40", "--n-grid", "2..4", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let set = cornerlab::setfile::parse_line(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["size"].as_u64(), Some(set.len() as u64));
    assert!(cornerlab::corners::is_three_ap_free(&set));
}

#[test]
fn malformed_input_reports_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.txt", "N 4\n1 1\n2 x\n");
    let out = cornerlab(&["corners", "count", "--in", &input]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unknown_flag_prints_usage() {
    let out = cornerlab(&["corners", "count", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn verify_is_deterministic_and_passes() {
    let a = cornerlab(&["verify", "--seed", "5", "--quick"]);
    let b = cornerlab(&["verify", "--seed", "5", "--quick"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let lines: Vec<Value> = String::from_utf8(a.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), cornerlab::verify::CHECKS.len());
    for l in &lines {
        for key in ["lemma", "trials", "hypothesisSatisfied", "conclusionHeld", "worstMargin", "schema_version"] {
            assert!(l.get(key).is_some(), "{key} missing in {l}");
        }
    }
}

#[test]
fn uniformity_and_spectrum_reports() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "s.txt", "N 4\n0 0\n1 1\n2 3\n3 2\n");
    let csv_path = dir.path().join("spec.csv");
    let out = cornerlab(&["uniformity", "--in", &input, "--spectrum", csv_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for key in ["functional", "alpha", "denominator", "method_agreement"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let csv = std::fs::read_to_string(csv_path).unwrap();
    assert_eq!(csv.lines().next(), Some("r,r2,re,im"));
    assert_eq!(csv.lines().count(), 17);

    let v = json(&cornerlab(&["spectrum", "--in", &input, "--box", "full"]));
    let mu: f64 = v["mu"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((mu - 4.0).abs() < 1e-9);
    assert!(v["traces"]["trace_holds"].as_bool().unwrap());
}

#[test]
fn energy_run_writes_trace_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("N 16\n");
    for k in 0..8 {
        for m in 0..8 {
            text.push_str(&format!("{k} {m}\n"));
        }
    }
    text.push_str("12 12\n9 14\n");
    let input = write(dir.path(), "w.txt", &text);
    let trace = dir.path().join("trace.csv");
    let out = cornerlab(&[
        "partition", "energy-run", "--in", &input, "--eps", "0.05", "--K", "0.01", "--rho", "4", "--profile", "toy",
        "--max-iters", "4", "--trace", trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(trace).unwrap();
    assert_eq!(csv.lines().next(), Some("iteration,cells,energy,badMass,refinedCells"));
    assert!(csv.lines().count() >= 2);
}

#[test]
fn partition_ap_reports_checks() {
    let out = cornerlab(&["partition", "ap", "--N", "101", "--r1", "7", "--r2", "-3", "--s", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["checks"]["is_partition"], true);
}

#[test]
fn hunt_finds_corner_in_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("N 6\n");
    for k in 0..6 {
        for m in 0..6 {
            text.push_str(&format!("{k} {m}\n"));
        }
    }
    let input = write(dir.path(), "full.txt", &text);
    let trace = dir.path().join("hunt.csv");
    let out = cornerlab(&["hunt", "--in", &input, "--profile", "toy", "--max-steps", "64", "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["outcome"]["kind"], "corner");
    assert!(std::fs::read_to_string(trace).unwrap().starts_with("step,branch"));
}

#[test]
fn increment_reports_verified_result() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("N 12\n");
    for k in 0..4 {
        for m in 0..4 {
            text.push_str(&format!("{k} {m}\n"));
        }
    }
    text.push_str("9 9\n");
    let input = write(dir.path(), "inc.txt", &text);
    let out = cornerlab(&["increment", "--in", &input, "--alpha", "0.001", "--profile", "toy"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verified"], true);
    assert_eq!(v["profile"], "toy");
}
