//! Browser bindings: exact position heatmaps, program trajectories and the
//! coin-flip compiler. Every export returns a JSON string; failures come
//! back as `{"error": …}` rather than exceptions.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use mazebot::automaton::{compile_rational, parse_automaton, verify_gadget, write_automaton, Simulator};
use mazebot::programs::ProgramKind;
use mazebot::walks::{dp_step_distribution, ArithmeticMode, WalkSpec};

/// Longest trajectory the page will ask for.
pub const MAX_STEPS: u32 = 200_000;

/// Largest step count for the heatmap.
pub const MAX_HEATMAP_STEPS: u32 = 120;

fn error(msg: impl std::fmt::Display) -> String {
    json!({"error": msg.to_string()}).to_string()
}

/// Law of the simple (or lazy) walk on `Z^2` after `n` steps:
/// `{"n", "max", "cells": [[x, y, p], …]}`.
#[wasm_bindgen]
pub fn heatmap(n: u32, lazy: bool) -> String {
    if n > MAX_HEATMAP_STEPS {
        return error(format!("at most {MAX_HEATMAP_STEPS} steps"));
    }
    let w = if lazy { WalkSpec::lazy(2) } else { WalkSpec::simple(2) };
    let mode = if n <= 40 {
        ArithmeticMode::Rational
    } else {
        ArithmeticMode::Float
    };
    let g = match dp_step_distribution(&w, n as u64, n as u64, mode) {
        Ok(g) => g,
        Err(e) => return error(e),
    };
    let cells: Vec<Value> = g
        .support()
        .into_iter()
        .map(|p| {
            let m = g.mass_f64(&p);
            json!([p[0], p[1], m])
        })
        .collect();
    let max = cells.iter().map(|c| c[2].as_f64().unwrap_or(0.0)).fold(0.0, f64::max);
    let origin = g.mass_rational(&[0, 0]).map(|r| r.to_string());
    json!({"n": n, "mode": mode.to_string(), "origin": origin, "max": max, "cells": cells}).to_string()
}

/// Runs a traversal program. Positions are projected on `(e1, e2)`; for
/// `z4` the pebble track is projected on `(e3, e4)`.
#[wasm_bindgen]
pub fn trajectory(program: &str, steps: u32, seed: u32) -> String {
    let kind: ProgramKind = match program.parse() {
        Ok(k) => k,
        Err(e) => return error(e),
    };
    if steps > MAX_STEPS {
        return error(format!("at most {MAX_STEPS} steps"));
    }
    let d = kind.build();
    let mut sim = match Simulator::new(&d.automaton, &d.flags, seed as u64) {
        Ok(s) => s,
        Err(e) => return error(e),
    };
    let mut robot = vec![[0i64, 0]];
    let mut pebble = Vec::new();
    let mut flag_hits = 0u32;
    for _ in 0..steps {
        let ev = sim.advance();
        flag_hits += u32::from(ev.observation.flag());
        let s = sim.state();
        if !ev.mv.dir.is_zero() {
            let c = s.robot.coords();
            if robot.last() != Some(&[c[0], c[1]]) {
                robot.push([c[0], c[1]]);
            }
        }
        if ev.carried != 0 && d.pebbles > 0 && d.dim >= 4 {
            let c = s.pebbles[0].coords();
            pebble.push([c[2], c[3]]);
        }
    }
    let s = sim.state();
    json!({
        "program": kind.name(),
        "steps": steps,
        "robot": robot,
        "pebble": pebble,
        "flag_hits": flag_hits,
        "final_state": d.automaton.state(s.state).name,
        "final_robot": s.robot.coords(),
    })
    .to_string()
}

fn named<P: std::fmt::Display>(
    a: &mazebot::automaton::RobotAutomaton,
    m: &std::collections::BTreeMap<usize, P>,
) -> Value {
    m.iter()
        .map(|(s, p)| (a.state(*s).name.clone(), Value::from(p.to_string())))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

/// Compiles an automaton description and checks every choice gadget by
/// exact absorption.
#[wasm_bindgen]
pub fn compile(text: &str) -> String {
    let src = match parse_automaton(text) {
        Ok(s) => s,
        Err(e) => return error(e),
    };
    let c = match compile_rational(&src) {
        Ok(c) => c,
        Err(e) => return error(e),
    };
    let a = &c.automaton;
    let mut gadgets = Vec::new();
    for g in &c.gadgets {
        match verify_gadget(a, g) {
            Ok(v) => {
                gadgets.push(json!({
                    "depth": g.depth,
                    "denominator": g.denominator.to_string(),
                    "expected": named(a, &v.expected),
                    "computed": named(a, &v.computed),
                    "exact": v.exact_match,
                    "balanced": v.displacement.is_ok(),
                }));
            }
            Err(e) => return error(e),
        }
    }
    json!({
        "source_states": src.states.len(),
        "compiled_states": a.len(),
        "gadgets": gadgets,
        "compiled": write_automaton(&a.to_rational()),
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_sums_to_one() {
        let v: Value = serde_json::from_str(&heatmap(6, false)).unwrap();
        let total: f64 = v["cells"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c[2].as_f64().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(v["origin"], "25/256");
        assert!(serde_json::from_str::<Value>(&heatmap(500, false)).unwrap()["error"].is_string());
    }

    #[test]
    fn trajectories_are_seeded() {
        assert_eq!(trajectory("z4", 5000, 3), trajectory("z4", 5000, 3));
        let v: Value = serde_json::from_str(&trajectory("z2", 100, 1)).unwrap();
        assert_eq!(v["robot"][0], json!([0, 0]));
        assert!(serde_json::from_str::<Value>(&trajectory("z5", 10, 1)).unwrap()["error"].is_string());
    }

    #[test]
    fn compile_reports_exact_gadgets() {
        let text = "mazebot-automaton 1\ndimension 1\npebbles 0\ninitial s\nstate s move 0\n  on * -> choose 1/3 s, 2/3 t\nstate t move +e1\n  on * -> s\n";
        let v: Value = serde_json::from_str(&compile(text)).unwrap();
        assert_eq!(v["gadgets"][0]["exact"], true);
        assert_eq!(v["gadgets"][0]["computed"]["t"], "2/3");
        assert!(serde_json::from_str::<Value>(&compile("nonsense")).unwrap()["error"].is_string());
    }
}
