//! End-to-end checks of the binary: output shapes, determinism across
//! thread counts, exit-code classes, and the worked examples.

use std::process::{Command, Output};

use serde_json::Value;

fn wicklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wicklab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let output = wicklab(args);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).expect("utf8 stdout")
}

fn run_json(args: &[&str]) -> Value {
    serde_json::from_str(&run_ok(args)).expect("json stdout")
}

#[test]
fn moments_engines_agree_and_echo_config() {
    let v = run_json(&[
        "moments", "--n", "6", "--factor", "x^2:2", "--factor", "1:2",
    ]);
    assert_eq!(v["command"], "moments");
    assert_eq!(v["total_degree"], 4);
    assert_eq!(v["factors"][0]["source"], "x^2");
    assert_eq!(v["factors"][1]["power"], 2);
    let formula = v["formula"].as_f64().unwrap();
    let brute = v["bruteforce"].as_f64().unwrap();
    assert!((formula - brute).abs() <= 1e-12 * formula.abs().max(1.0));
    let mc = v["montecarlo"]["value"].as_f64().unwrap();
    let se = v["montecarlo"]["std_error"].as_f64().unwrap();
    assert!((mc - formula).abs() <= 6.0 * se);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let args = [
        "moments", "--n", "10", "--factor", "sin(2 * x):2", "--factor", "x:2",
        "--samples", "20000", "--seed", "7",
    ];
    let one = run_ok(&[&["--threads", "1"], &args[..]].concat());
    let four = run_ok(&[&["--threads", "4"], &args[..]].concat());
    assert_eq!(one, four);
    let env_run = Command::new(env!("CARGO_BIN_EXE_wicklab"))
        .args(args)
        .env("WICKLAB_THREADS", "2")
        .output()
        .expect("binary runs");
    assert!(env_run.status.success());
    assert_eq!(one, String::from_utf8(env_run.stdout).unwrap());
}

#[test]
fn diagrams_reproduce_the_hand_example() {
    let v = run_json(&["diagrams", "--n", "2", "--wick", "1:3", "--wick", "1:1"]);
    assert_eq!(v["total"].as_f64().unwrap(), -1.0);
    assert_eq!(v["closed"].as_f64().unwrap(), -1.0);
    assert_eq!(v["gaussian"].as_f64().unwrap(), 0.0);
    assert!((v["oracle"].as_f64().unwrap() + 1.0).abs() <= 1e-12);
    // one admissible partition (the 4-block), six traversals of it
    let terms = v["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 6);
    assert!(terms
        .iter()
        .all(|t| t["blocks"] == serde_json::json!([[1, 2, 3, 4]])));
}

#[test]
fn converge_emits_the_fixed_csv_header() {
    let csv = run_ok(&[
        "converge", "--wick", "sin(3*x):2", "--wick", "x:2", "--grid", "8,16,32,64",
    ]);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,bernoulli,gaussian,abs_error,error_times_n"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|line| line.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for pair in rows.windows(2) {
        let ratio = pair[0][3] / pair[1][3];
        assert!((1.6..=2.4).contains(&ratio), "error ratio {ratio}");
    }
}

#[test]
fn wick_exponent_hits_the_closed_form() {
    let v = run_json(&["wick", "--degree", "3", "--alpha", "0.5"]);
    assert_eq!(v["base"]["kind"], "signs");
    assert_eq!(
        v["polynomials"][3]["coeffs"],
        serde_json::json!([0.0, -3.0, 0.0, 1.0])
    );
    let partial = v["exponent"]["partial_sum"].as_f64().unwrap();
    let closed = v["exponent"]["closed_form"].as_f64().unwrap();
    assert!((partial - closed).abs() <= 1e-8);
}

#[test]
fn hermite_rows_carry_exact_second_moments() {
    let v = run_json(&[
        "hermite", "--term", "1,2:1", "--grid", "8,16", "--samples", "100",
        "--reference-n", "256",
    ]);
    for (row, n) in v["rows"].as_array().unwrap().iter().zip([8.0f64, 16.0]) {
        let second = row["moments"][1].as_f64().unwrap();
        let exact = 1.0 - 2.0 / n + 2.0 / (n * n);
        assert!((second - exact).abs() <= 1e-12, "n={n}: {second} vs {exact}");
        assert_eq!(row["std_errors"][1].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn sample_is_seeded_and_deterministic() {
    let args = ["sample", "--n", "60", "--f", "1 + x", "--samples", "8", "--seed", "5"];
    let first = run_ok(&args);
    let second = run_ok(&args);
    assert_eq!(first, second);
    let v: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["values"].as_array().unwrap().len(), 8);
    assert!(v["variance_target"].as_f64().unwrap() > 0.0);
}

#[test]
fn csv_grid_factors_load() {
    let grid = wicklab::funcgrid::sample(
        &wicklab::funcgrid::parse_expr("x", 1).unwrap(),
        4,
    )
    .unwrap();
    let path = std::env::temp_dir().join(format!("wicklab-cli-grid-{}.csv", std::process::id()));
    std::fs::write(&path, grid.to_csv()).unwrap();
    let path_arg = format!("@{}:2", path.display());
    let v = run_json(&["moments", "--n", "4", "--factor", &path_arg]);
    let formula = v["formula"].as_f64().unwrap();
    let brute = v["bruteforce"].as_f64().unwrap();
    assert!((formula - brute).abs() <= 1e-12);
    // the file's grid size must match --n
    let mismatch = wicklab(&["moments", "--n", "5", "--factor", &path_arg]);
    assert_eq!(mismatch.status.code(), Some(2));
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn exit_codes_classify_failures() {
    assert_eq!(wicklab(&["moments", "--n", "4", "--factor", "x +"]).status.code(), Some(2));
    assert_eq!(
        wicklab(&["moments", "--n", "25", "--factor", "x:2", "--engine", "bruteforce"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        wicklab(&[
            "sample", "--n", "4", "--f", "x", "--samples", "2",
            "--out", "/nonexistent/dir/file.json",
        ])
        .status
        .code(),
        Some(4)
    );
}

#[test]
fn verify_reports_every_criterion() {
    let output = wicklab(&["verify", "--json"]);
    let reports: Value = serde_json::from_slice(&output.stdout).expect("json report");
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 10);
    for report in reports {
        assert_eq!(
            report["passed"], true,
            "criterion {} failed: {}",
            report["id"], report["details"]
        );
    }
    assert!(output.status.success());
}
