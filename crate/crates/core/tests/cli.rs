use std::fs;
use std::path::Path;
use std::process::Command;

use mforge::report::{report_schema, validate_report};

fn mforge(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mforge")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const P1_CUBED: &str = r#"{"version": 1, "space": {"space": "p1_power", "d": 3}, "seed": 3}"#;

#[test]
fn verify_all_passes_and_reports_every_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", P1_CUBED);
    let out = dir.path().join("out");
    let o = mforge(&["verify-all", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report = validate_report(&fs::read_to_string(out.join("verify-all.json")).unwrap()).unwrap();
    for s in ["moment_axioms", "invariance_identities", "coadjoint_hessian", "flow", "calabi_decomposition", "mu_invariant", "extremal_field", "legendre", "tian_zhu"] {
        assert!(report.suite(s).is_some_and(|x| x.passed), "{s}");
    }
}

#[test]
fn flow_from_coincident_start_writes_monotone_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"version": 1, "space": {"space": "p1_power", "d": 3},
            "initial_point": [[[1,0],[0,0]], [[0.8,0],[0.6,0]], [[0,0],[1,0]]]}"#,
    );
    let out = dir.path().join("o");
    let o = mforge(&["flow", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("flow.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,energy,grad_norm,kn_value"));
    let energies: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(energies.len() > 10);
    assert!(energies.windows(2).all(|w| w[1] <= w[0] + 1e-9));

    let coincident = write(dir.path(), "k.json", r#"{"version": 1, "space": {"space": "p1_power", "d": 3}, "initial_point": "coincident"}"#);
    let o = mforge(&["flow", "--config", &coincident, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", P1_CUBED);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("o{k}"));
        assert_eq!(mforge(&["flow", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "9"]).status.code(), Some(0));
        outputs.push((fs::read(out.join("flow.csv")).unwrap(), fs::read(out.join("flow.json")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad_space = write(dir.path(), "a.json", r#"{"version": 1, "space": {"space": "sphere", "d": 3}}"#);
    let o = mforge(&["flow", "--config", &bad_space]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown variant"));
    let bad_version = write(dir.path(), "b.json", r#"{"version": 7, "space": {"space": "p1_power", "d": 3}}"#);
    assert_eq!(mforge(&["flow", "--config", &bad_version]).status.code(), Some(1));
    let bad_fn = write(dir.path(), "c.json", r#"{"version": 1, "space": {"space": "p1_power", "d": 3}, "function": "cubic"}"#);
    assert_eq!(mforge(&["flow", "--config", &bad_fn]).status.code(), Some(1));
    let wrong_task = write(dir.path(), "d.json", r#"{"version": 1, "task": "legendre", "space": {"space": "p1_power", "d": 3}}"#);
    assert_eq!(mforge(&["flow", "--config", &wrong_task, "--out", dir.path().to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(mforge(&["flow"]).status.code(), Some(1));
    assert_eq!(mforge(&["bogus"]).status.code(), Some(1));
    assert_eq!(mforge(&["--help"]).status.code(), Some(0));
}

#[test]
fn verification_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // an impossible tolerance makes the moment-condition check fail
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"version": 1, "space": {"space": "p1_power", "d": 2}, "tolerances": {"moment_fd": 1e-30}}"#,
    );
    let o = mforge(&["verify-all", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn counterexample_config_reports_both_signs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"version": 1, "space": {"space": "product", "inner": {"space": "p1_power", "d": 3}},
            "function": "indefinite_split", "initial_point": "coincident"}"#,
    );
    let o = mforge(&["decompose", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = validate_report(&fs::read_to_string(dir.path().join("decompose.json")).unwrap()).unwrap();
    let ev = &r.suite("calabi_decomposition").unwrap().series["eigenvalues"];
    assert!(ev.iter().any(|&x| x > 1.0) && ev.iter().any(|&x| x < -1.0), "{ev:?}");
}

#[test]
fn schema_fixtures_round_trip() {
    let o = mforge(&["schema"]);
    assert_eq!(o.status.code(), Some(0));
    let printed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed, report_schema());
    assert!(printed["required"].as_array().unwrap().iter().any(|v| v == "schema_version"));

    let valid = r#"{"schema_version": "1", "task": "legendre", "seed": 0,
        "space": {"space": "p1_power", "d": 2}, "function": "quadratic", "passed": true,
        "suites": [{"name": "x", "passed": true, "checks": [{"name": "c", "value": 0.0, "tol": 1.0,
        "relation": "at_most", "passed": true}], "values": {}, "series": {}, "notes": []}],
        "artifacts": []}"#;
    let missing = valid.replace(r#""seed": 0,"#, "");
    let wrong_type = valid.replace(r#""seed": 0"#, r#""seed": "zero""#);
    assert!(validate_report(valid).is_ok());
    assert!(validate_report(&missing).is_err());
    assert!(validate_report(&wrong_type).is_err());
    assert!(validate_report(&valid.replace(r#""schema_version": "1""#, r#""schema_version": "0""#)).is_err());

    let dir = tempfile::tempdir().unwrap();
    for (name, body, code) in [("v.json", valid.to_string(), 0), ("m.json", missing, 1), ("w.json", wrong_type, 1)] {
        let p = write(dir.path(), name, &body);
        assert_eq!(mforge(&["validate", &p]).status.code(), Some(code), "{name}");
    }
}
