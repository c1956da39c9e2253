use std::path::PathBuf;
use std::process::{Command, Output};

fn mrd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrd")).args(args).output().expect("spawn mrd")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden", name].iter().collect();
    std::fs::read_to_string(p).unwrap()
}

/// Compares CSV text cell by cell, numbers to 1e-12 relative.
fn assert_csv_close(got: &str, want: &str) {
    let g: Vec<&str> = got.lines().collect();
    let w: Vec<&str> = want.lines().collect();
    assert_eq!(g.len(), w.len(), "row count");
    assert_eq!(g[0], w[0], "header");
    for (gl, wl) in g.iter().zip(&w).skip(1) {
        for (a, b) in gl.split(',').zip(wl.split(',')) {
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{gl} vs {wl}"),
                _ => assert_eq!(a, b, "{gl} vs {wl}"),
            }
        }
    }
}

fn cell(line: &str, col: usize) -> f64 {
    line.split(',').nth(col).unwrap().parse().unwrap()
}

#[test]
fn binary_example_matches_golden() {
    let o = mrd(&["example", "binary"]);
    assert!(o.status.success());
    assert_csv_close(&stdout(&o), &golden("binary_example.csv"));
}

#[test]
fn gaussian_lambda_grid_matches_golden() {
    let o = mrd(&["example", "gaussian", "--lambda-grid=-0.5,-1,-2,-4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_csv_close(&text, &golden("gaussian_lambda.csv"));
    // λ = -1 row: D0 = sqrt(4/15), d1 from the closed form.
    let row = text.lines().nth(3).unwrap();
    assert!((cell(row, 1) - (4.0f64 / 15.0).sqrt()).abs() < 1e-9);
    assert!((cell(row, 2) - 0.26772).abs() < 1e-4);
}

#[test]
fn matched_binary_row_is_inverse_entropy() {
    let o = mrd(&["curve", "--example", "binary", "--ensemble", "matched", "--rates", "0.5"]);
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    assert!((cell(row, 2) - 0.110_027_864_438_359_5).abs() < 1e-12);
}

#[test]
fn generic_curve_agrees_with_closed_form() {
    let g = stdout(&mrd(&["curve", "--example", "binary", "--ensemble", "iid", "--rates", "0.1:0.9:0.2"]));
    let c = stdout(&mrd(&["curve", "--example", "binary", "--ensemble", "iid", "--rates", "0.1:0.9:0.2", "--closed-form"]));
    let (g, c): (Vec<_>, Vec<_>) = (g.lines().skip(1).collect(), c.lines().skip(1).collect());
    assert_eq!(g.len(), 5);
    for (a, b) in g.iter().zip(&c) {
        assert!((cell(a, 2) - cell(b, 2)).abs() < 1e-3, "{a} vs {b}");
    }
}

#[test]
fn empty_grid_is_usage_error() {
    let o = mrd(&["curve", "--example", "binary", "--rates", "1:0:0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
}

#[test]
fn unsupported_ensemble_is_usage_error() {
    let o = mrd(&["curve", "--example", "gaussian", "--ensemble", "superposition", "--rates", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_mrd"))
        .args(["verify", "reductions"])
        .env("MRD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let args = ["simulate", "--example", "binary", "--ensemble", "cc", "--n", "400", "--rate", "0.5", "--trials", "200", "--seed", "7"];
    let a = mrd(&args);
    let b = mrd(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let mean = v["stats"]["mean_d1"].as_f64().unwrap();
    assert!((mean - 0.11003).abs() <= 0.03, "mean_d1 {mean}");
}

#[test]
fn simulate_tie_rules_separate() {
    let mean = |tie: &str| {
        let o = mrd(&[
            "simulate", "--example", "binary", "--ensemble", "iid", "--n", "400", "--rate", "0.75", "--trials", "200",
            "--seed", "7", "--tie", tie,
        ]);
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        v["stats"]["mean_d1"].as_f64().unwrap()
    };
    assert!(mean("pessimistic") - mean("uniform") > 0.1);
}

#[test]
fn simulate_appends_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    for seed in ["1", "2"] {
        let o = mrd(&[
            "simulate", "--example", "binary", "--ensemble", "cc", "--n", "64", "--rate", "0.5", "--trials", "10",
            "--seed", seed, "--csv", csv.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("rate_bits,d0,d1"));
    assert!(lines[2].ends_with(",64,10,2"));
}

#[test]
fn config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let a = mrd(&[
        "curve", "--example", "parallel", "--rates", "0.5,1.0", "--weight", "0.4", "--emit-config",
        cfg.to_str().unwrap(),
    ]);
    assert!(a.status.success());
    let b = mrd(&["curve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);
    // A flag overrides the loaded value.
    let c = mrd(&["curve", "--config", cfg.to_str().unwrap(), "--rates", "0.5"]);
    assert_eq!(stdout(&c).lines().count(), 2);
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"example": "binary", "rates": "0.5", "colour": 1}"#).unwrap();
    let o = mrd(&["curve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn custom_problem_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("custom.json");
    let text = r#"{
        "problem": {
            "source": [0.5, 0.5],
            "d0": [[0.0, 0.0], [1.0, 0.0]],
            "d1": [[0.0, 1.0], [1.0, 0.0]],
            "spec": {"kind": "cc", "q": [0.5, 0.5]}
        },
        "rates": "0.5"
    }"#;
    std::fs::write(&cfg, text).unwrap();
    let o = mrd(&["curve", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!((cell(&row, 2) - 0.110_027_864_438_359_5).abs() < 1e-6, "{row}");
}

#[test]
fn verify_suites_pass() {
    let r = mrd(&["verify", "reductions"]);
    assert!(r.status.success());
    assert!(stdout(&r).contains("PASS superposition |U|=1 equals cc"));
    let e = mrd(&["verify", "examples"]);
    assert!(e.status.success());
    let text = stdout(&e);
    assert!(text.contains("PASS ternary superposition equals matched"));
    assert!(!text.contains("FAIL"));
}
