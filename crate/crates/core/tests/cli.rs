use std::process::{Command, Output};

use serde_json::Value;

fn mazebot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mazebot"))
        .args(args)
        .env_remove("MAZEBOT_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn demo() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/demo.aut")
}

#[test]
fn z3_return_at_four_steps() {
    let out = mazebot(&["analyze", "z3-return", "--n", "4"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["results"]["value"], "5/72");
}

#[test]
fn compile_and_verify_demo() {
    let out = mazebot(&["compile", "--in", demo(), "--verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["results"]["all_exact"], true);
    for g in v["results"]["verification"].as_array().unwrap() {
        assert_eq!(g["expected"], g["computed"]);
        assert_eq!(g["zero_displacement"], true);
    }
}

#[test]
fn compiled_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.aut");
    let p = path.to_str().unwrap();
    assert!(mazebot(&["compile", "--in", demo(), "--emit", p]).status.success());
    // The compiled file is itself a valid (already fair-bit) automaton.
    let again = mazebot(&["compile", "--in", p, "--verify"]);
    assert!(again.status.success());
    assert_eq!(json(&again)["results"]["gadgets"], 0);
}

#[test]
fn zero_budget_visits_only_the_origin() {
    let out = mazebot(&["simulate", "z2", "--budget", "0", "--seed", "7"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["results"]["visited"], serde_json::json!([[0, 0]]));
    assert_eq!(v["config"]["seed"], 7);
}

#[test]
fn parse_errors_carry_positions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.aut");
    std::fs::write(
        &path,
        "mazebot-automaton 1\ndimension 2\npebbles 0\ninitial a\nstate a move +e9\n",
    )
    .unwrap();
    let out = mazebot(&["compile", "--in", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "parse");
    assert_eq!(e["error"]["line"], 5);
    assert!(e["error"]["column"].as_u64().unwrap() > 1);
}

#[test]
fn infeasible_grid_is_a_resource_error() {
    let out = mazebot(&["analyze", "grid", "--walk", "simple-z8", "--n", "400"]);
    assert!(!out.status.success());
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "resource");
}

#[test]
fn usage_errors_are_json() {
    let out = mazebot(&["coverage", "z5"]);
    assert_eq!(out.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "usage");
}

#[test]
fn grid_text_parses_back() {
    let out = mazebot(&["analyze", "grid", "--walk", "simple-z2", "--n", "4"]);
    assert!(out.status.success());
    let g = mazebot::walks::parse_grid(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(g.mass_rational(&[0, 0]).unwrap().to_string(), "9/64");
}

#[test]
fn csv_projection() {
    let out = mazebot(&[
        "returns", "walk-z1", "--budget", "1000", "--trials", "50", "--format", "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("budget,returned,fraction"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn seed_flag_beats_environment() {
    let run = |env: &str| {
        Command::new(env!("CARGO_BIN_EXE_mazebot"))
            .args(["simulate", "z4", "--budget", "500", "--seed", "1"])
            .env("MAZEBOT_SEED", env)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("5"), run("6"));
}

#[test]
fn timing_is_opt_in() {
    let plain = json(&mazebot(&["analyze", "multinomial", "--n", "6"]));
    assert!(plain.get("wall_clock_ms").is_none());
    assert_eq!(plain["results"]["value"], "90");
    let timed = json(&mazebot(&["analyze", "multinomial", "--n", "6", "--timing"]));
    assert!(timed["wall_clock_ms"].is_u64());
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = mazebot(&[
        "coverage",
        "z2",
        "--budget",
        "100",
        "--trials",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["experiment"], "coverage");
}
