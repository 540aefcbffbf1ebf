//! End-to-end tests of the command-line binary: report contents, exit
//! codes, and byte-level determinism.

use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tollflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not a json document ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

#[test]
fn solve_reports_the_tolled_corridor_equilibrium() {
    let out = run(&["solve", "--scenario", "appendix-g", "--toll", "e1=8"]);
    assert!(out.status.success());
    let doc = stdout_json(&out);
    let results = &doc["results"];
    assert!((results["edge_flows"]["e1"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!((results["edge_flows"]["e2"].as_f64().unwrap() - 6.0).abs() < 1e-6);
    assert!((results["revenue"].as_f64().unwrap() - 16.0).abs() < 1e-8);
    assert_eq!(results["converged"], Value::Bool(true));
    assert!(doc["solver"]["gap"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn refund_reports_the_water_filling_scheme() {
    let out = run(&["refund", "--scenario", "appendix-g", "--toll", "e1=8"]);
    assert!(out.status.success());
    let scheme = &stdout_json(&out)["scheme"];
    let refunds = &scheme["refunds"];
    assert!((refunds["H"].as_f64().unwrap() - 0.0).abs() < 1e-6);
    assert!((refunds["M"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!((refunds["L"].as_f64().unwrap() - 2.8).abs() < 1e-6);
    assert!((scheme["ex_post_income"]["M"].as_f64().unwrap() - 992.0).abs() < 1e-8);
    assert!((scheme["ex_post_income"]["L"].as_f64().unwrap() - 992.0).abs() < 1e-8);
    let before = scheme["gini_before"].as_f64().unwrap();
    let after = scheme["gini_after"].as_f64().unwrap();
    assert!(after <= before + 1e-12);
}

#[test]
fn all_experiments_pass() {
    for name in ["prop1", "prop2", "prop4", "cor1", "lemma3"] {
        let out = run(&["reproduce", name]);
        assert!(
            out.status.success(),
            "{name} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(
            stdout_json(&out)["results"]["pass"],
            Value::Bool(true),
            "{name}"
        );
    }
}

#[test]
fn reports_are_deterministic_apart_from_timing() {
    let strip = |out: &Output| -> String {
        String::from_utf8_lossy(&out.stdout)
            .lines()
            .filter(|l| !l.contains("timing_ms"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let args = ["refund", "--scenario", "appendix-g", "--toll", "e1=8"];
    assert_eq!(strip(&run(&args)), strip(&run(&args)));
    let args = ["reproduce", "lemma3"];
    assert_eq!(strip(&run(&args)), strip(&run(&args)));
}

#[test]
fn invalid_inputs_exit_with_code_two() {
    let cases: &[&[&str]] = &[
        &["solve", "--scenario", "appendix-g", "--toll", "e1=-2"],
        &["solve", "--scenario", "appendix-g", "--toll", "e9=1"],
        &["solve", "--scenario", "appendix-g", "--toll", "e1"],
        &["solve", "--scenario", "/no/such/file.json"],
        &["solve", "--scenario", "appendix-g", "--tolerance", "-1"],
        &[
            "refund",
            "--scenario",
            "appendix-g",
            "--toll",
            "e1=8",
            "--policy",
            "custom-alpha",
        ],
        &[
            "refund",
            "--scenario",
            "appendix-g",
            "--toll",
            "e1=8",
            "--alpha",
            "H=1",
        ],
        &["reproduce", "prop9"],
        &["no-such-command"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "args {args:?}");
        assert!(out.stderr.len() > 0, "args {args:?} produced no stderr");
    }
}

#[test]
fn verify_endo_flags_the_suboptimal_toll() {
    let out = run(&[
        "verify-endo",
        "--scenario",
        "appendix-g",
        "--toll",
        "e1=8",
        "--expect-equilibrium",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = &stdout_json(&out)["verification"];
    assert_eq!(v["certified"], Value::Bool(false));
    assert!(v["profitable_count"].as_u64().unwrap() > 0);

    // Without the expectation flag the same report exits cleanly.
    let out = run(&["verify-endo", "--scenario", "appendix-g", "--toll", "e1=8"]);
    assert!(out.status.success());
}

#[test]
fn verify_exo_passes_on_a_fresh_solve() {
    let out = run(&["verify-exo", "--scenario", "appendix-g", "--toll", "e1=8"]);
    assert!(out.status.success());
    let v = &stdout_json(&out)["verification"];
    assert_eq!(v["pass"], Value::Bool(true));
    assert!(v["cost_identity_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn csv_format_flattens_and_drops_timing() {
    let out = run(&[
        "solve",
        "--scenario",
        "appendix-g",
        "--toll",
        "e1=8",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("key,value"));
    assert!(text.contains("results.revenue,16.0"));
    assert!(text.contains("results.edge_flows.e1,2.0"));
    assert!(!text.contains("timing_ms"));
}

#[test]
fn gini_reports_metrics_and_axioms() {
    let out = run(&["gini", "--scenario", "appendix-g", "--check-axioms", "100"]);
    assert!(out.status.success());
    let results = &stdout_json(&out)["results"];
    assert!((results["gini"].as_f64().unwrap() - 0.15021220695230392).abs() < 1e-12);
    assert_eq!(results["axioms"]["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn scenario_files_load_from_disk() {
    let doc = r#"{
        "nodes": ["s", "t"],
        "edges": [
            {"id": "fast", "tail": "s", "head": "t", "a": 1.0, "b": 1.0, "p": 1.0},
            {"id": "slow", "tail": "s", "head": "t", "a": 5.0, "b": 1.0, "p": 1.0}
        ],
        "groups": [
            {"id": "only", "vot": 1.0, "income": 10.0, "demand": 1.0,
             "origin": "s", "destination": "t"}
        ],
        "beta": 1.0
    }"#;
    let path = std::env::temp_dir().join("tollflow-cli-test-scenario.json");
    std::fs::write(&path, doc).expect("scenario file written");
    let out = run(&["solve", "--scenario", path.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let results = &stdout_json(&out)["results"];
    assert!((results["edge_flows"]["fast"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((results["total_cost"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    std::fs::remove_file(&path).ok();
}

#[test]
fn so_search_beats_the_untolled_equilibrium_cost() {
    let out = run(&["so-search", "--scenario", "appendix-g", "--grid", "200"]);
    assert!(out.status.success());
    let results = &stdout_json(&out)["results"];
    let so = results["total_cost"].as_f64().unwrap();
    let ue = results["untolled_equilibrium_cost"].as_f64().unwrap();
    assert!(so <= ue);
    assert!((ue - 79.96767676767678).abs() < 1e-8);
}
