use std::fs;
use std::path::Path;
use std::process::Command;

use liesym::cli::{run, CSV_VERSION_LINE, EXIT_CHECK_FAILED, EXIT_OK, EXIT_PARSE, EXIT_POLE, EXIT_USAGE};
use proptest::prelude::*;

fn run_in(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_liesym"))
        .args(args)
        .current_dir(dir)
        .env("LIESYM_SEED", "42")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn run_lib(args: &[&str]) -> i32 {
    let mut full = vec!["liesym"];
    full.extend_from_slice(args);
    run(full, &mut Vec::new(), &mut Vec::new())
}

#[test]
fn symmetrize_writes_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run_in(
        dir.path(),
        &["symmetrize", "--catalog", "dbh", "--b0", "1", "--f-init", "2,1,1,0.5", "--out", "s.csv", "--report", "s.json"],
    );
    assert_eq!(code, EXIT_OK, "{out}{err}");
    let csv = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_VERSION_LINE));
    assert_eq!(lines.next(), Some("t,f0,f1,f2,f3,err_est"));
    assert_eq!(lines.count(), 1001);
    assert!(dir.path().join("s.gp").exists());
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(rep["pass"], true);
    assert_eq!(rep["seed"], 42);
    // f0 = 2 + t, f3 = 1/2 - t with this gauge
    let fin = rep["final"].as_array().unwrap();
    assert!((fin[0].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert!((fin[3].as_f64().unwrap() + 0.5).abs() < 1e-9);
}

#[test]
fn json_input_matches_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let def = r#"{
        "vars": ["x"],
        "basis": [["1"], ["x"], ["x^2"]],
        "coeffs": ["t", "0", "1"]
    }"#;
    fs::write(dir.path().join("ric.json"), def).unwrap();
    let (code, out, _) = run_in(dir.path(), &["check-algebra", "--input", "ric.json"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("closed, r=3, jacobi=0, center=0"));
    let a = run_in(dir.path(), &["symmetrize", "--input", "ric.json", "--f-init", "1,0,-1,0"]).1;
    let b = run_in(dir.path(), &["symmetrize", "--catalog", "riccati", "--f-init", "1,0,-1,0"]).1;
    // identical apart from the system label
    assert_eq!(a.lines().skip(1).collect::<Vec<_>>(), b.lines().skip(1).collect::<Vec<_>>());
}

#[test]
fn not_closed_and_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("open.json"), r#"{"vars": ["x"], "basis": [["1"], ["x^3"]]}"#).unwrap();
    let (code, _, err) = run_in(dir.path(), &["check-algebra", "--input", "open.json"]);
    assert_eq!(code, EXIT_CHECK_FAILED, "{err}");
    assert!(err.contains("[X1, X2]"), "{err}");
    fs::write(dir.path().join("bad.json"), r#"{"vars": ["x"], "basis": [["1 +* x"]]}"#).unwrap();
    assert_eq!(run_in(dir.path(), &["check-algebra", "--input", "bad.json"]).0, EXIT_PARSE);
    fs::write(dir.path().join("junk.json"), "not json").unwrap();
    assert_eq!(run_in(dir.path(), &["check-algebra", "--input", "junk.json"]).0, EXIT_PARSE);
}

#[test]
fn pde_reports_and_control() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run_in(dir.path(), &["pde", "--catalog", "partial_riccati", "--report", "p.json"]);
    assert_eq!(code, EXIT_OK, "{out}");
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert_eq!(rep["integrable"], true);
    assert_eq!(rep["paths"].as_array().unwrap().len(), 3);
    let (code, out, _) = run_in(
        dir.path(),
        &["pde", "--catalog", "partial_riccati", "--param", "perturb=1/10", "--report", "q.json"],
    );
    assert_eq!(code, EXIT_CHECK_FAILED);
    assert!(out.contains("NOT integrable"));
    assert!(dir.path().join("q.json").exists());
    fs::write(dir.path().join("path.json"), r#"{"waypoints": [[0, 0], [0.5, 0], [1, 1]], "steps": 100}"#).unwrap();
    let (code, out, _) = run_in(dir.path(), &["pde", "--catalog", "partial_riccati", "--path", "path.json"]);
    assert_eq!(code, EXIT_OK, "{out}");
}

#[test]
fn fixed_exit_codes() {
    assert_eq!(run_lib(&["list"]), EXIT_OK);
    assert_eq!(run_lib(&["--help"]), EXIT_OK);
    assert_eq!(run_lib(&[]), EXIT_USAGE);
    assert_eq!(run_lib(&["check-algebra"]), EXIT_USAGE);
    assert_eq!(run_lib(&["check-algebra", "--catalog", "riccati", "--input", "x.json"]), EXIT_USAGE);
    assert_eq!(run_lib(&["show", "riccati", "--param", "nokey"]), EXIT_USAGE);
    assert_eq!(run_lib(&["pde", "--catalog", "dbh"]), EXIT_USAGE);
    assert_eq!(run_lib(&["verify", "--catalog", "dbh"]), EXIT_OK);
    assert_eq!(
        run_lib(&["integrate", "--catalog", "riccati", "--param", "eta=0", "--x0", "1", "--t-span", "0,2"]),
        EXIT_POLE
    );
    assert_eq!(run_lib(&["symmetrize", "--catalog", "dbh", "--t-span", "1,0"]), EXIT_USAGE);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn nonpositive_step_is_usage_error(step in -1.0f64..=0.0) {
        let s = step.to_string();
        prop_assert_eq!(run_lib(&["symmetrize", "--catalog", "riccati", "--step", &s]), EXIT_USAGE);
        prop_assert_eq!(run_lib(&["integrate", "--catalog", "riccati", "--x0", "0", "--step", &s]), EXIT_USAGE);
    }

    #[test]
    fn f_init_length_must_be_r_plus_one(n in 1usize..8) {
        let v = vec!["0.5"; n].join(",");
        let code = run_lib(&["symmetrize", "--catalog", "aff_generic", "--f-init", &v, "--t-span", "0,0.1"]);
        if n == 3 {
            prop_assert_eq!(code, EXIT_OK);
        } else {
            prop_assert_eq!(code, EXIT_USAGE);
        }
    }
}
