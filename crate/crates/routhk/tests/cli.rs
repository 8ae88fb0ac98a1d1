use std::collections::BTreeMap;
use std::process::Command;

use routhk::certificates::{run_certificates, Tolerances};
use routhk::cli::run_from;
use routhk::io;
use routhk::{load_example, AppError, Check};
use routhk_core::numerics::Grid;
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["routhk"];
    full.extend_from_slice(args);
    let code = run_from(full, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn overrides(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn reduce_json(args: &[&str]) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reduced.json");
    let mut full = vec!["reduce"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--output", path.to_str().unwrap()]);
    let (code, _, err) = run(&full);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn coeff(v: &Value, key: &str) -> f64 {
    v["coefficients"][key].to_string().parse().unwrap()
}

#[test]
fn every_builtin_example_loads_and_certifies() {
    let grid = |k| Grid::uniform(k, -1.0, 1.0, 11).unwrap();
    for name in routhk::example_names() {
        let case = load_example(name, &BTreeMap::new()).unwrap();
        let report = run_certificates(&case, &grid(case.k()), &Tolerances::default(), 2).unwrap();
        let failures: Vec<_> = report.failures().collect();
        assert!(failures.is_empty(), "{name}: {failures:?}");
    }
}

#[test]
fn degenerate_navier_parameters_are_rejected() {
    for pairs in [
        [("nu", 0.0), ("lambda", 2.0)],
        [("nu", 1.0), ("lambda", -2.0)],
    ] {
        let Err(err) = load_example("navier", &overrides(&pairs)) else {
            panic!("{pairs:?} accepted");
        };
        assert!(matches!(err, AppError::InvalidParameters(_)), "{err}");
        assert_eq!(err.exit_code(), 2);
    }
    let (code, _, err) = run(&[
        "check",
        "--example",
        "navier",
        "--nu",
        "0",
        "--report",
        "/dev/null",
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("nu"), "{err}");
}

#[test]
fn unknown_names_exit_with_two() {
    let (code, _, err) = run(&["check", "--example", "no_such_system"]);
    assert_eq!(code, 2);
    assert!(err.contains("no_such_system"));
    assert!(matches!(
        load_example("x", &BTreeMap::new()),
        Err(AppError::UnknownExample(_))
    ));
    let (code, _, _) = run(&[
        "reconstruct",
        "--example",
        "navier",
        "--solution",
        "missing",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn missing_system_file_is_an_io_error() {
    let (code, _, _) = run(&["check", "--system", "/definitely/not/here.json"]);
    assert_eq!(code, 3);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_routhk");
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.csv");
    let status = Command::new(bin)
        .args(["check", "--example", "navier", "--grid", "11", "--report"])
        .arg(&report)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("solution,check,max_residual,expected,passed"));
    assert!(!text.contains(",false"));

    let status = Command::new(bin)
        .args([
            "reconstruct",
            "--example",
            "navier",
            "--solution",
            "coscosh",
            "--output",
        ])
        .arg(dir.path().join("phi.csv"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn tightened_tolerance_turns_checks_red() {
    let (code, out, _) = run(&[
        "check",
        "--example",
        "navier",
        "--grid",
        "11",
        "--tol",
        "1e-30",
        "--report",
        "/dev/null",
    ]);
    assert_eq!(code, 1);
    assert!(out.contains("FAIL"));
}

#[test]
fn navier_reduced_routhian_coefficients() {
    let v = reduce_json(&["--example", "navier"]);
    assert_eq!(v["base_n"], 1);
    assert!((coeff(&v, "v2_1^2") - 0.5).abs() < 1e-12);
    assert!((coeff(&v, "v2_2^2") - 0.875).abs() < 1e-12);
    assert!((coeff(&v, "v2_2") - 0.75).abs() < 1e-12);
    assert!((coeff(&v, "const") + 0.625).abs() < 1e-12);
    assert!(v["coefficients"].get("v2_1").is_none());

    let zero = reduce_json(&["--example", "navier", "--mu", "0", "0"]);
    let keys: Vec<&String> = zero["coefficients"].as_object().unwrap().keys().collect();
    assert!(
        keys.iter().all(|k| k.ends_with("^2") || *k == "const"),
        "{keys:?}"
    );
    assert_eq!(coeff(&zero, "const"), 0.0);

    let other = reduce_json(&["--example", "navier", "--lambda", "1", "--nu", "3"]);
    assert!((coeff(&other, "v2_1^2") - 1.5).abs() < 1e-12);
    assert!((coeff(&other, "v2_2^2") - (3.5 - 16.0 / 14.0)).abs() < 1e-12);
}

#[test]
fn reduce_emits_the_algebra() {
    let v = reduce_json(&["--example", "harmonic_a410"]);
    let alg = io::algebra_from_json(&v["algebra"].to_string()).unwrap();
    assert_eq!(alg.m(), 4);
    let back = io::algebra_json(&alg);
    assert_eq!(back, v["algebra"]);
}

#[test]
fn navier_reconstructions() {
    let dir = tempfile::tempdir().unwrap();
    for (label, expected) in [("xy", 0), ("coscosh", 4), ("const", 0)] {
        let out = dir.path().join(format!("{label}.csv"));
        let (code, stdout, err) = run(&[
            "reconstruct",
            "--example",
            "navier",
            "--solution",
            label,
            "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, expected, "{label}: {stdout}{err}");
        if expected == 4 {
            assert!(err.contains("inconsistent"), "{err}");
        }
    }
}

#[test]
fn reconstructed_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let texts: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let out = dir.path().join(format!("phi{i}.csv"));
            let res = dir.path().join(format!("res{i}.csv"));
            let (code, _, _) = run(&[
                "reconstruct",
                "--example",
                "navier",
                "--solution",
                "xy",
                "--output",
                out.to_str().unwrap(),
                "--residual",
                res.to_str().unwrap(),
            ]);
            assert_eq!(code, 0);
            let mut bytes = std::fs::read(out).unwrap();
            bytes.extend(std::fs::read(res).unwrap());
            bytes
        })
        .collect();
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn field_csv_round_trip() {
    let case = load_example("navier", &BTreeMap::new()).unwrap();
    let grid = Grid::uniform(2, -1.0, 1.0, 7).unwrap();
    let phi = case.solution("xy").unwrap().sample(&grid).unwrap();
    let mut buf = Vec::new();
    io::write_field_csv(&phi, &mut buf).unwrap();
    let back = io::read_field_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back.values(), phi.values());
    assert_eq!(back.grid(), phi.grid());
}

#[test]
fn deviation_csv_is_one_based() {
    let dir = tempfile::tempdir().unwrap();
    let dev = dir.path().join("dev.csv");
    let (code, _, _) = run(&[
        "reconstruct",
        "--example",
        "harmonic_generic",
        "--solution",
        "twisted",
        "--output",
        "-",
        "--deviation",
        dev.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dev).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("beta,a,max_abs_deviation"));
    for (line, want) in lines.zip(["1,1,", "1,2,"]) {
        assert!(line.starts_with(want), "{line}");
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(value <= 1e-6);
    }
}

const WAVE_PAIR: &str = r#"{
  "name": "wave_pair",
  "description": "Two coupled wave fields over (t, x) with a translation in the first",
  "parameters": [{ "name": "c", "default": 2.0, "min": 0.0 }, { "name": "s", "default": 0.5 }],
  "derived": [{ "name": "c2", "expr": "c^2" }],
  "constraints": [{ "expr": "c", "rule": "positive", "message": "wave speed must be positive" }],
  "fields": 2,
  "k": 2,
  "lagrangian": {
    "kinetic": [["1", "0", "s", "0"], ["0", "1", "0", "0"], ["s", "0", "-c2", "0"], ["0", "0", "0", "-c2"]],
    "potential": "q2^2/2"
  },
  "symmetry": { "translations": [1] },
  "reduction": { "base": [2], "anchor": [0, 0], "connection": [["1", "0"]] },
  "mu": ["0", "0"],
  "system_checks": ["regularity", "cyclic", "g-regularity"],
  "solutions": [
    { "label": "rest", "space": "full", "field": ["0", "0"], "mu": ["0", "0"], "checks": ["solves-el", "momentum-constancy", "noether"] },
    { "label": "travelling", "space": "full", "field": ["sin(t1 - t2/c)", "0"], "checks": ["solves-el", "noether"] }
  ]
}"#;

#[test]
fn system_file_with_expressions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("system.json");
    std::fs::write(&path, WAVE_PAIR).unwrap();
    let p = path.to_str().unwrap();
    let (code, out, err) = run(&[
        "check",
        "--system",
        p,
        "--grid",
        "9",
        "--report",
        "/dev/null",
    ]);
    assert_eq!(code, 1, "{out}{err}");
    assert!(out.contains("FAIL travelling solves-el"), "{out}");
    assert!(!out.contains("FAIL rest"), "{out}");
    assert!(!out.contains("FAIL system"), "{out}");

    let (code, _, err) = run(&["check", "--system", p, "--param", "c=0"]);
    assert_eq!(code, 2);
    assert!(err.contains("wave speed"), "{err}");

    std::fs::write(
        &path,
        WAVE_PAIR.replace("\"k\": 2", "\"k\": 2, \"bogus\": 1"),
    )
    .unwrap();
    let (code, _, _) = run(&["check", "--system", p]);
    assert_eq!(code, 2);
}

#[test]
fn check_rows_follow_declaration_order() {
    let case = load_example("navier", &BTreeMap::new()).unwrap();
    let grid = Grid::uniform(2, -1.0, 1.0, 21).unwrap();
    let a = run_certificates(&case, &grid, &Tolerances::default(), 1).unwrap();
    let b = run_certificates(&case, &grid, &Tolerances::default(), 4).unwrap();
    assert_eq!(a.rows, b.rows);
    assert!(a.find("coscosh", Check::Inconsistent).unwrap().passed);
    assert!(
        a.find("non_reconstructible", Check::NonReconstructible)
            .unwrap()
            .passed
    );

    // The grid-dependent floor swamps the gap on a coarse grid; the row stays red.
    let coarse = Grid::uniform(2, -1.0, 1.0, 9).unwrap();
    let c = run_certificates(&case, &coarse, &Tolerances::default(), 2).unwrap();
    assert!(!c.find("coscosh", Check::Inconsistent).unwrap().passed);
}
