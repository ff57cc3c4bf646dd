use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modtower"))
        .args(args)
        .env_remove("MODTOWER_ENUM_BOUND")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut a = args.to_vec();
    a.push("--json");
    let o = run(&a);
    let v: Value = serde_json::from_str(&stdout(&o)).expect("exactly one JSON document");
    (v, o.status.code().unwrap())
}

#[test]
fn classify_s() {
    let o = run(&["group", "classify", "--matrix", "0,-1,1,0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "elliptic; fixed point i");
    let (v, code) = json(&["group", "classify", "--matrix", "0,-1,1,0"]);
    assert_eq!(code, 0);
    assert_eq!(v["classification"], "elliptic");
    assert_eq!(v["fixed_point"]["literal"], "i");
}

#[test]
fn classify_central_and_hyperbolic() {
    let o = run(&["group", "classify", "--matrix", "-1,0,0,-1"]);
    assert!(stdout(&o).starts_with("central"));
    let o = run(&["group", "classify", "--matrix", "2,1,1,1"]);
    assert!(stdout(&o).starts_with("non-elliptic"));
}

#[test]
fn mul_and_inverse_agree() {
    let (v, _) = json(&["group", "mul", "--matrix", "2,1,1,1", "--matrix", "1,-1,-1,2"]);
    assert_eq!(v["result"], serde_json::json!(["1", "0", "0", "1"]));
    let (v, _) = json(&["group", "inv", "--matrix", "2,1,1,1"]);
    assert_eq!(v["result"], serde_json::json!(["1", "-1", "-1", "2"]));
}

#[test]
fn word_and_decompose_round_trip() {
    let (v, _) = json(&["group", "decompose", "--matrix", "5,2,7,3"]);
    assert_eq!(v["in_sl2z"], true);
    let w = v["word"].as_str().unwrap().to_string();
    let (e, _) = json(&["group", "word", "--word", &w]);
    assert_eq!(e["result"], serde_json::json!(["5", "2", "7", "3"]));
}

#[test]
fn verify_passes() {
    let o = run(&["group", "verify"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn classpoly_minus_15() {
    let (v, code) = json(&["cm", "classpoly", "--disc", "-15"]);
    assert_eq!(code, 0);
    assert_eq!(v["degree"], 2);
    assert_eq!(v["coefficients"], serde_json::json!([1, 191025, -121287375]));
    let o = run(&["cm", "classpoly", "--disc", "-4"]);
    assert_eq!(stdout(&o).trim(), "x - 1728");
}

#[test]
fn tp_at_i_rho() {
    let o = run(&["cm", "tp", "--s1", "i", "--s2", "-1/2+1/2√-3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn domain_error_exit_one_with_json_error() {
    let (v, code) = json(&["hp", "fix", "--matrix", "2,0,0,1"]);
    assert_eq!(code, 1);
    assert!(v["error"].is_string());
    let (v, code) = json(&["cm", "classpoly", "--disc", "-5"]);
    assert_eq!(code, 1);
    assert_eq!(v["kind"], "domain");
}

#[test]
fn usage_error_exit_two() {
    let o = run(&["group", "classify", "--matrix", "1,2,3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hecke_degree_d2_level_one() {
    let (v, code) = json(&["hecke", "degree", "--g", "2,0,0,1", "--level", "1"]);
    assert_eq!(code, 0);
    assert_eq!(v["degree"]["left"], 3);
    assert_eq!(v["degree"]["right"], 3);
    let (v, _) = json(&["hecke", "components", "--g", "2,0,0,1", "--level", "1"]);
    assert_eq!(v["components"]["count"], 1);
}

#[test]
fn solve_lambda_from_lambda() {
    let o = run(&["adelic", "solve-lambda", "--lambda", "5", "--precision", "12"]);
    assert!(stdout(&o).starts_with("lambda = 5 mod 12"));
}

#[test]
fn level_orbit_and_projection() {
    let (v, code) = json(&["level", "pr", "--point", "i", "--level", "6", "--to", "3"]);
    assert_eq!(code, 0);
    assert_eq!(v["to"]["N"], 3);
    let o = run(&["level", "pr", "--point", "i", "--level", "6", "--to", "4"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn axioms_standard_passes_and_mutation_fails() {
    let o = run(&["axioms", "run"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let (v, code) = json(&["axioms", "run", "--mutate", "break-center"]);
    assert_eq!(code, 1);
    let failed: Vec<&str> = v["axioms"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|a| a["status"] == "fail")
        .map(|a| a["group"].as_str().unwrap())
        .collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|g| *g == "action"));
}

#[test]
fn axioms_deterministic_across_modes() {
    let a = run(&["axioms", "run", "--json", "--seed", "7"]);
    let b = run(&["axioms", "run", "--json", "--seed", "7", "--sequential"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn text_and_json_agree() {
    let o = run(&["hp", "act", "--matrix", "1,1,0,1", "--point", "i"]);
    let (v, _) = json(&["hp", "act", "--matrix", "1,1,0,1", "--point", "i"]);
    assert_eq!(stdout(&o).trim(), v["result"]["literal"].as_str().unwrap());
}
