//! End-to-end tests of the `berkcal` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn berkcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_berkcal")).args(args).output().expect("run binary")
}

fn fit_chromium(extra: &[&str]) -> Output {
    let first = fixture("chromium_standards.csv");
    let second = fixture("chromium_sample_a.csv");
    let mut args = vec!["fit", "--first", first.to_str().unwrap(), "--second", second.to_str().unwrap()];
    args.extend_from_slice(extra);
    berkcal(&args)
}

fn rows(out: &Output) -> Vec<(String, String, f64)> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 3, "line `{l}`");
            (f[0].to_string(), f[1].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

fn get(rows: &[(String, String, f64)], model: &str, q: &str) -> f64 {
    rows.iter().find(|r| r.0 == model && r.1 == q).unwrap().2
}

#[test]
fn comma_locale_fixture_fits_every_model() {
    let out = fit_chromium(&["--locale", "comma", "--sigma-delta-sq", "2.5865e-6"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&out);
    for q in ["alpha", "beta", "x0"] {
        assert_eq!(get(&r, "usual", q), get(&r, "unknown", q));
    }
    assert!(get(&r, "known", "solver_scaled_residual") < 1e-10);
    assert!((get(&r, "usual", "x0") - 0.0106).abs() < 1e-4);
}

#[test]
fn output_uses_point_decimals() {
    let out = fit_chromium(&["--locale", "comma", "--format", "json"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["value"].is_number());
    }
    let csv = fit_chromium(&["--locale", "comma"]);
    assert!(String::from_utf8(csv.stdout).unwrap().lines().skip(1).all(|l| l.matches(',').count() == 2));
}

#[test]
fn wrong_locale_is_an_input_error_with_position() {
    let out = fit_chromium(&[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("chromium_standards.csv:2:1"), "{err}");
}

#[test]
fn missing_file_and_bad_flags_are_input_errors() {
    let out = berkcal(&["fit", "--first", "/nonexistent/a.csv", "--second", "/nonexistent/b.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = fit_chromium(&["--locale", "comma", "--model", "known"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sigma-delta-sq"));
    let out = fit_chromium(&["--locale", "comma", "--level", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn too_few_standards_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    std::fs::write(&first, "x,y\n0,1\n1,3\n").unwrap();
    std::fs::write(&second, "y0\n2\n2.1\n").unwrap();
    let out = berkcal(&["fit", "--first", first.to_str().unwrap(), "--second", second.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exponent_notation_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    let report = dir.path().join("report.csv");
    std::fs::write(&first, "x,y\n0,1.0e0\n0.5,2.1\n1,2.9e0\n1.5,4.05\n2,5.0\n").unwrap();
    std::fs::write(&second, "y0\n3.0\n3.1\n").unwrap();
    let out = berkcal(&[
        "fit",
        "--first",
        first.to_str().unwrap(),
        "--second",
        second.to_str().unwrap(),
        "--model",
        "usual",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("model,quantity,value\nusual,alpha,"));
}

#[test]
fn simulate_is_deterministic_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("one.toml");
    std::fs::write(
        &grid,
        "[defaults]\nreplications = 50\nseed = 3\n\n[grid]\nx0 = [0.8]\nn = [20]\nk = [20]\nsigma_delta_sq = [0.01]\n",
    )
    .unwrap();
    let g = grid.to_str().unwrap();
    let a = berkcal(&["simulate", "--grid", g]);
    let b = berkcal(&["simulate", "--grid", g, "--threads", "1"]);
    let c = berkcal(&["simulate", "--grid", g, "--threads", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let other = berkcal(&["simulate", "--grid", g, "--seed", "4"]);
    assert_ne!(a.stdout, other.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 5);
}

#[test]
fn simulate_rejects_bad_grid() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("bad.toml");
    std::fs::write(&grid, "[defaults]\n\n[grid]\nx0 = [0.8]\nn = [1]\nk = [20]\nsigma_delta_sq = [0.01]\n").unwrap();
    let out = berkcal(&["simulate", "--grid", grid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_fast_passes() {
    let out = berkcal(&["validate", "--fast"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("checks passed"));
    assert!(!text.contains("FAIL"));
}
