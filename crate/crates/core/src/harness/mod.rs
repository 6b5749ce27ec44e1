//! Seeded Monte Carlo experiments over the traversal programs and plain
//! simple walks, with exact oracles from [`crate::walks`] and JSON reports.
//!
//! Trial `i` of an experiment with master seed `s` draws its bits from
//! `RngStream::new(trial_seed(s, i))`; results are folded in trial order,
//! so a report is a pure function of its configuration.

mod experiments;
pub mod stats;

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::automaton::{AutomatonError, GENERATOR_ID};
use crate::programs::ProgramKind;
use crate::walks::{ArithmeticMode, WalkError};

pub use experiments::{
    coverage_experiment, default_checkpoints, distribution_experiment, flag_choice_experiment, increment_experiment,
    return_experiment, simulate, CdfPoint, CheckpointCoverage, CoverageResults, DistributionBin, DistributionResults,
    FlagChoiceResults, IncrementResults, LowerBoundCheck, ReturnOracle, ReturnResults, SimulationResults,
    MAX_COVERAGE_WORK, ORACLE_CHECKPOINT,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that overrides the default master seed.
pub const SEED_ENV: &str = "MAZEBOT_SEED";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Invalid(_) => "invalid",
            HarnessError::Resource(_) | HarnessError::Walk(WalkError::Resource(_)) => "resource",
            HarnessError::Walk(WalkError::Parse { .. }) | HarnessError::Automaton(AutomatonError::Parse { .. }) => {
                "parse"
            }
            HarnessError::Walk(_) => "walk",
            HarnessError::Automaton(_) => "automaton",
            HarnessError::Io(_) => "io",
        }
    }

    /// The error as a JSON object, with position fields for parse errors.
    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
            }
        });
        match self {
            HarnessError::Automaton(AutomatonError::Parse { line, column, .. }) => {
                obj["error"]["line"] = (*line).into();
                obj["error"]["column"] = (*column).into();
            }
            HarnessError::Walk(WalkError::Parse { line, .. }) => {
                obj["error"]["line"] = (*line).into();
            }
            _ => {}
        }
        obj
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    Default,
    Env,
    Flag,
}

/// `--seed` wins, then the environment variable, then the built-in default.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>) -> Result<(u64, SeedSource), HarnessError> {
    if let Some(s) = flag {
        return Ok((s, SeedSource::Flag));
    }
    match env {
        Some(v) => parse_seed(v)
            .map(|s| (s, SeedSource::Env))
            .ok_or_else(|| HarnessError::Invalid(format!("{SEED_ENV}=`{v}` is not an unsigned 64-bit integer"))),
        None => Ok((crate::DEFAULT_SEED, SeedSource::Default)),
    }
}

/// Decimal or `0x` hexadecimal.
pub fn parse_seed(s: &str) -> Option<u64> {
    let s = s.trim();
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16).ok(),
        None => s.replace('_', "").parse().ok(),
    }
}

/// What an experiment runs: a traversal program, or the plain simple walk
/// on `Z^k` sampled directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Program(ProgramKind),
    Walk(usize),
}

impl Target {
    pub fn dim(self) -> usize {
        match self {
            Target::Program(k) => match k {
                ProgramKind::Z2 => 2,
                ProgramKind::Z4 => 4,
                ProgramKind::Z6 => 6,
                ProgramKind::Z8 => 8,
            },
            Target::Walk(d) => d,
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Program(k) => write!(f, "{k}"),
            Target::Walk(d) => write!(f, "walk-z{d}"),
        }
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(d) = s.strip_prefix("walk-z") {
            let d: usize = d.parse().map_err(|_| format!("bad walk dimension in `{s}`"))?;
            if !(1..=8).contains(&d) {
                return Err(format!("walk dimension must be 1..=8, got {d}"));
            }
            return Ok(Target::Walk(d));
        }
        s.parse::<ProgramKind>()
            .map(Target::Program)
            .map_err(|_| format!("unknown target `{s}` (expected z2, z4, z6, z8 or walk-zK)"))
    }
}

impl Serialize for Target {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub target: Target,
    pub dimension: usize,
    /// Steps per trial: automaton steps for coverage and simulation, program
    /// moves for return experiments, walk steps for plain walks.
    pub budget: u64,
    pub trials: u64,
    pub radius: u64,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub mode: ArithmeticMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

pub const DEFAULT_BUDGET: u64 = 10_000;
pub const DEFAULT_TRIALS: u64 = 100;
pub const DEFAULT_RADIUS: u64 = 2;

impl ExperimentConfig {
    pub fn new(target: Target) -> Self {
        ExperimentConfig {
            target,
            dimension: target.dim(),
            budget: DEFAULT_BUDGET,
            trials: DEFAULT_TRIALS,
            radius: DEFAULT_RADIUS,
            seed: crate::DEFAULT_SEED,
            seed_source: SeedSource::Default,
            mode: ArithmeticMode::Rational,
            out: None,
        }
    }

    pub fn budget(mut self, b: u64) -> Self {
        self.budget = b;
        self
    }

    pub fn trials(mut self, t: u64) -> Self {
        self.trials = t;
        self
    }

    pub fn radius(mut self, r: u64) -> Self {
        self.radius = r;
        self
    }

    pub fn seed(mut self, s: u64) -> Self {
        self.seed = s;
        self.seed_source = SeedSource::Flag;
        self
    }

    pub fn mode(mut self, m: ArithmeticMode) -> Self {
        self.mode = m;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Invalid("trials must be at least 1".into()));
        }
        if self.dimension != self.target.dim() {
            return Err(HarnessError::Invalid(format!(
                "dimension {} does not match target {}",
                self.dimension, self.target
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Results {
    Coverage(CoverageResults),
    Returns(ReturnResults),
    Distribution(DistributionResults),
    Increments(IncrementResults),
    FlagChoice(FlagChoiceResults),
    Simulation(SimulationResults),
    Value(serde_json::Value),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub generator: &'static str,
    pub experiment: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    pub results: Results,
    /// Only filled when timing is requested, so that reports stay
    /// byte-identical by default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
}

impl ExperimentReport {
    pub fn new(experiment: &'static str, config: Option<ExperimentConfig>, results: Results) -> Self {
        ExperimentReport {
            schema_version: SCHEMA_VERSION,
            generator: GENERATOR_ID,
            experiment,
            config,
            results,
            wall_clock_ms: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// Aggregate rows only; the JSON form is the complete record.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.results {
            Results::Coverage(r) => {
                out.push_str("budget,mean_coverage,min_coverage,full_coverage_trials,full_coverage_fraction\n");
                for c in &r.checkpoints {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        c.budget, c.mean_coverage, c.min_coverage, c.full_coverage_trials, c.full_coverage_fraction
                    );
                }
            }
            Results::Returns(r) => {
                out.push_str("budget,returned,fraction\n");
                for c in &r.cdf {
                    let _ = writeln!(out, "{},{},{}", c.budget, c.returned, c.fraction);
                }
            }
            Results::Distribution(r) => {
                out.push_str("point,observed,expected\n");
                for b in &r.bins {
                    let p = b.point.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
                    let _ = writeln!(out, "{p},{},{}", b.observed, b.expected);
                }
            }
            Results::Increments(r) => {
                out.push_str("direction,count\n");
                for (d, c) in &r.counts {
                    let _ = writeln!(out, "{d},{c}");
                }
            }
            Results::FlagChoice(r) => {
                out.push_str("outcome,count,exact_probability\n");
                for (o, c) in &r.counts {
                    let _ = writeln!(out, "{o},{c},{}", r.exact.get(o).map_or("", String::as_str));
                }
            }
            Results::Simulation(r) => {
                out.push_str("steps,lattice_moves,flag_hits,visited_count,pebble_moves\n");
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.steps, r.lattice_moves, r.flag_hits, r.visited_count, r.pebble_moves
                );
            }
            Results::Value(v) => {
                csv_from_value(v, &mut out);
            }
        }
        out
    }
}

// Arrays of flat objects become a table; anything else a key,value listing.
fn csv_from_value(v: &serde_json::Value, out: &mut String) {
    let scalar = |v: &serde_json::Value| match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if let Some(rows) = v.get("rows").and_then(|r| r.as_array()) {
        if let Some(first) = rows.first().and_then(|r| r.as_object()) {
            let keys: Vec<&String> = first.keys().collect();
            let _ = writeln!(out, "{}", keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(","));
            for row in rows {
                let line: Vec<String> = keys.iter().map(|k| scalar(&row[k.as_str()])).collect();
                let _ = writeln!(out, "{}", line.join(","));
            }
            return;
        }
    }
    out.push_str("key,value\n");
    if let Some(obj) = v.as_object() {
        for (k, x) in obj {
            if !x.is_array() && !x.is_object() {
                let _ = writeln!(out, "{k},{}", scalar(x));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(7), Some("9")).unwrap(), (7, SeedSource::Flag));
        assert_eq!(resolve_seed(None, Some("9")).unwrap(), (9, SeedSource::Env));
        assert_eq!(resolve_seed(None, Some("0x10")).unwrap(), (16, SeedSource::Env));
        assert_eq!(
            resolve_seed(None, None).unwrap(),
            (crate::DEFAULT_SEED, SeedSource::Default)
        );
        assert!(resolve_seed(None, Some("abc")).is_err());
    }

    #[test]
    fn targets_parse() {
        assert_eq!("z6".parse::<Target>().unwrap(), Target::Program(ProgramKind::Z6));
        assert_eq!("walk-z3".parse::<Target>().unwrap(), Target::Walk(3));
        assert_eq!(Target::Walk(3).to_string(), "walk-z3");
        assert!("walk-z0".parse::<Target>().is_err());
        assert!("z3".parse::<Target>().is_err());
    }

    #[test]
    fn errors_serialize_with_positions() {
        let e = HarnessError::Automaton(AutomatonError::Parse {
            line: 3,
            column: 9,
            message: "bad".into(),
        });
        let j = e.to_json();
        assert_eq!(j["error"]["kind"], "parse");
        assert_eq!(j["error"]["line"], 3);
        assert_eq!(j["error"]["column"], 9);
    }
}
