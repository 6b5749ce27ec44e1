use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use serde::Serialize;

use super::stats::{binomial_check, chi_square, BinomialCheck, ChiSquare};
use super::{ExperimentConfig, ExperimentReport, HarnessError, Results, Target};
use crate::automaton::{run, trial_seed, verify_gadget, RngStream, RobotAutomaton, Simulator, StateRole, StepRecord};
use crate::lattice::{l1_ball, FlagSet, LatticePoint};
use crate::programs::{ProgramDescriptor, ProgramKind};
use crate::walks::{
    ball_size, dp_step_distribution, first_return_cdf, origin_return_series, return_lower_bound, WalkSpec,
};

/// Largest `|ball| × trials` a coverage experiment may touch.
pub const MAX_COVERAGE_WORK: u64 = 1_000_000_000;

/// Step at which return experiments are compared with the exact
/// first-return probability (or the budget, if smaller).
pub const ORACLE_CHECKPOINT: u64 = 100;

/// Largest checkpoint accepted by distribution experiments; the exact grid
/// for the simple walk on `Z^2` at this size is instant.
pub const MAX_DISTRIBUTION_CHECKPOINT: u64 = 64;

/// Horizon of the exact partial sums behind the return lower bound.
pub const LOWER_BOUND_HORIZON: u64 = 100;

/// Visited cells are listed in simulation reports up to this many.
pub const VISITED_LIST_CAP: usize = 10_000;

/// Powers of ten below `budget`, then `budget` itself.
pub fn default_checkpoints(budget: u64) -> Vec<u64> {
    let mut out: Vec<u64> = std::iter::successors(Some(1u64), |x| x.checked_mul(10))
        .take_while(|&x| x < budget)
        .collect();
    out.push(budget);
    out
}

struct WalkLane {
    pos: Vec<i64>,
    rng: RngStream,
}

impl WalkLane {
    fn new(dim: usize, seed: u64) -> Self {
        WalkLane {
            pos: vec![0; dim],
            rng: RngStream::new(seed),
        }
    }

    #[inline]
    fn step(&mut self) {
        let d = self.rng.below(2 * self.pos.len() as u64) as usize;
        self.pos[d / 2] += if d.is_multiple_of(2) { 1 } else { -1 };
    }
}

fn l1(x: &[i64]) -> u64 {
    x.iter().map(|c| c.unsigned_abs()).sum()
}

fn program(target: Target) -> Option<ProgramDescriptor> {
    match target {
        Target::Program(k) => Some(k.build()),
        Target::Walk(_) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointCoverage {
    pub budget: u64,
    pub mean_coverage: f64,
    pub min_coverage: f64,
    pub full_coverage_trials: u64,
    pub full_coverage_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageResults {
    pub ball_size: usize,
    pub time_unit: &'static str,
    pub checkpoints: Vec<CheckpointCoverage>,
    /// Ball cells visited by each trial at each checkpoint.
    pub per_trial: Vec<Vec<u64>>,
    pub monotone: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag_hits: Option<Vec<u64>>,
    /// Final L1 distance of the pebble from the origin, counted over trials.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pebble_displacement_histogram: Option<BTreeMap<u64, u64>>,
}

/// Fraction of the L1 ball of radius `cfg.radius` visited by each trial, at
/// every checkpoint.
pub fn coverage_experiment(cfg: &ExperimentConfig, checkpoints: &[u64]) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    let dim = cfg.dimension;
    let size = ball_size(dim, cfg.radius);
    if size.saturating_mul(cfg.trials) > MAX_COVERAGE_WORK {
        return Err(HarnessError::Resource(format!(
            "ball of {size} cells times {} trials exceeds {MAX_COVERAGE_WORK}",
            cfg.trials
        )));
    }
    let mut checkpoints: Vec<u64> = checkpoints.iter().copied().filter(|&c| c <= cfg.budget).collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    if checkpoints.is_empty() {
        checkpoints.push(cfg.budget);
    }
    let ball: Vec<LatticePoint> = l1_ball(dim, cfg.radius);
    let index: FxHashMap<Vec<i64>, usize> = ball.iter().enumerate().map(|(i, p)| (p.coords().to_vec(), i)).collect();
    let desc = program(cfg.target);
    let radius = cfg.radius;

    let mut per_trial = Vec::with_capacity(cfg.trials as usize);
    let mut flag_hits = desc.as_ref().map(|_| Vec::with_capacity(cfg.trials as usize));
    let mut pebble_hist: Option<BTreeMap<u64, u64>> = desc.as_ref().filter(|d| d.pebbles > 0).map(|_| BTreeMap::new());

    for i in 0..cfg.trials {
        let seed = trial_seed(cfg.seed, i);
        let mut seen = vec![false; ball.len()];
        let mut count = 0u64;
        let mark = |x: &[i64], seen: &mut Vec<bool>, count: &mut u64| {
            if l1(x) <= radius {
                let k = index[x];
                if !seen[k] {
                    seen[k] = true;
                    *count += 1;
                }
            }
        };
        let origin = vec![0; dim];
        mark(&origin, &mut seen, &mut count);
        let mut row = Vec::with_capacity(checkpoints.len());
        let mut next = 0;
        while next < checkpoints.len() && checkpoints[next] == 0 {
            row.push(count);
            next += 1;
        }
        match &desc {
            Some(d) => {
                let mut sim = Simulator::new(&d.automaton, &d.flags, seed)?;
                let mut hits = 0u64;
                for t in 1..=cfg.budget {
                    let ev = sim.advance();
                    if ev.observation.flag() {
                        hits += 1;
                    }
                    if !ev.mv.dir.is_zero() {
                        mark(sim.state().robot.coords(), &mut seen, &mut count);
                    }
                    while next < checkpoints.len() && checkpoints[next] == t {
                        row.push(count);
                        next += 1;
                    }
                }
                if let Some(f) = flag_hits.as_mut() {
                    f.push(hits);
                }
                if let Some(h) = pebble_hist.as_mut() {
                    *h.entry(sim.state().pebbles[0].l1_norm()).or_insert(0) += 1;
                }
            }
            None => {
                let mut lane = WalkLane::new(dim, seed);
                for t in 1..=cfg.budget {
                    lane.step();
                    mark(&lane.pos, &mut seen, &mut count);
                    while next < checkpoints.len() && checkpoints[next] == t {
                        row.push(count);
                        next += 1;
                    }
                }
            }
        }
        per_trial.push(row);
    }

    let n = ball.len() as f64;
    let trials = cfg.trials as f64;
    let summary = checkpoints
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            let col: Vec<u64> = per_trial.iter().map(|r| r[j]).collect();
            let full = col.iter().filter(|&&c| c as usize == ball.len()).count() as u64;
            CheckpointCoverage {
                budget: b,
                mean_coverage: col.iter().sum::<u64>() as f64 / n / trials,
                min_coverage: *col.iter().min().expect("trials >= 1") as f64 / n,
                full_coverage_trials: full,
                full_coverage_fraction: full as f64 / trials,
            }
        })
        .collect();
    let monotone = per_trial.iter().all(|r| r.windows(2).all(|w| w[0] <= w[1]));
    let results = CoverageResults {
        ball_size: ball.len(),
        time_unit: if desc.is_some() {
            "automaton steps"
        } else {
            "walk steps"
        },
        checkpoints: summary,
        per_trial,
        monotone,
        flag_hits,
        pebble_displacement_histogram: pebble_hist,
    };
    Ok(ExperimentReport::new(
        "coverage",
        Some(cfg.clone()),
        Results::Coverage(results),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfPoint {
    pub budget: u64,
    pub returned: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnOracle {
    pub walk: String,
    pub checkpoint: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    pub probability: f64,
    pub check: BinomialCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundCheck {
    pub horizon: u64,
    /// `1 - 1/S(horizon)`, where `S` sums `P(Y_n = 0)` from `n = 0`.
    pub value: f64,
    pub empirical: f64,
    pub exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnResults {
    pub time_unit: &'static str,
    pub returned: u64,
    pub fraction: f64,
    pub cdf: Vec<CdfPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<ReturnOracle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<LowerBoundCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_note: Option<String>,
    /// First return time of each trial; `null` when none within budget.
    pub return_times: Vec<Option<u64>>,
}

/// First return of the robot (or walker) to the origin, within
/// `cfg.budget` program moves (walk steps for plain walks).
///
/// For programs, gadget moves are not counted: the time is the number of
/// moves made by program states, and only positions after such moves are
/// tested. In `Z^4`, `Z^6` and `Z^8` the pebble stays at the origin until
/// the robot first comes back, so this is the first excursion's return.
pub fn return_experiment(cfg: &ExperimentConfig, checkpoints: &[u64]) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    let dim = cfg.dimension;
    let desc = program(cfg.target);
    let mut times = Vec::with_capacity(cfg.trials as usize);
    for i in 0..cfg.trials {
        let seed = trial_seed(cfg.seed, i);
        let t = match &desc {
            Some(d) => {
                let mut sim = Simulator::new(&d.automaton, &d.flags, seed)?;
                let mut moves = 0u64;
                let mut hit = None;
                while moves < cfg.budget {
                    let ev = sim.advance();
                    if !ev.mv.dir.is_zero() && d.automaton.state(ev.from).role == StateRole::Program {
                        moves += 1;
                        if sim.state().robot.is_origin() {
                            hit = Some(moves);
                            break;
                        }
                    }
                }
                hit
            }
            None => {
                let mut lane = WalkLane::new(dim, seed);
                let mut hit = None;
                for t in 1..=cfg.budget {
                    lane.step();
                    if lane.pos.iter().all(|&c| c == 0) {
                        hit = Some(t);
                        break;
                    }
                }
                hit
            }
        };
        times.push(t);
    }

    let trials = cfg.trials as f64;
    let mut cps: Vec<u64> = checkpoints.iter().copied().filter(|&c| c <= cfg.budget).collect();
    cps.push(cfg.budget);
    cps.sort_unstable();
    cps.dedup();
    let cdf = cps
        .iter()
        .map(|&b| {
            let returned = times.iter().filter(|t| t.is_some_and(|t| t <= b)).count() as u64;
            CdfPoint {
                budget: b,
                returned,
                fraction: returned as f64 / trials,
            }
        })
        .collect();
    let returned = times.iter().filter(|t| t.is_some()).count() as u64;
    let fraction = returned as f64 / trials;

    // Exact oracles on the walk that drives the excursion.
    let walk_dim = if desc.is_some() { 2 } else { dim };
    let walk = WalkSpec::simple(walk_dim);
    let mut notes = Vec::new();
    let t_o = cfg.budget.min(ORACLE_CHECKPOINT);
    let oracle = match first_return_cdf(&walk, t_o, cfg.mode) {
        Ok(series) => {
            let p = series.f64_at(t_o as usize);
            let hits = times.iter().filter(|t| t.is_some_and(|t| t <= t_o)).count() as u64;
            Some(ReturnOracle {
                walk: format!("simple walk on Z^{walk_dim}"),
                checkpoint: t_o,
                exact: series.rational().map(|v| v[t_o as usize].to_string()),
                probability: p,
                check: binomial_check(hits, cfg.trials, p),
            })
        }
        Err(e) => {
            notes.push(format!("first-return oracle skipped: {e}"));
            None
        }
    };
    let horizon = cfg.budget.min(LOWER_BOUND_HORIZON);
    let lower_bound = if horizon == 0 {
        None
    } else {
        match origin_return_series(&walk, horizon, cfg.mode) {
            Ok(s) => {
                let value = return_lower_bound(&s);
                Some(LowerBoundCheck {
                    horizon,
                    value,
                    empirical: fraction,
                    exceeded: fraction >= value,
                })
            }
            Err(e) => {
                notes.push(format!("lower bound skipped: {e}"));
                None
            }
        }
    };
    let results = ReturnResults {
        time_unit: if desc.is_some() { "program moves" } else { "walk steps" },
        returned,
        fraction,
        cdf,
        oracle,
        lower_bound,
        oracle_note: (!notes.is_empty()).then(|| notes.join("; ")),
        return_times: times,
    };
    Ok(ExperimentReport::new(
        "returns",
        Some(cfg.clone()),
        Results::Returns(results),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionBin {
    pub point: Vec<i64>,
    pub observed: u64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionResults {
    pub observable: &'static str,
    pub checkpoint: u64,
    pub samples: u64,
    pub trials_used: u64,
    /// Trials that hit the step budget before completing a sample.
    pub incomplete_trials: u64,
    pub skipped: bool,
    pub outside_support: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_square: Option<ChiSquare>,
    pub passed: bool,
    pub bins: Vec<DistributionBin>,
}

/// Collects samples from `z4` runs: consecutive blocks of `block` pebble
/// moves, each giving the pebble's `(e3, e4)` displacement over the block.
/// A run stops at `cap` automaton steps; partial blocks are dropped.
fn pebble_blocks(
    d: &ProgramDescriptor,
    block: u64,
    want: u64,
    cap: u64,
    seed: u64,
    mut sink: impl FnMut(Vec<i64>),
) -> Result<(u64, u64), HarnessError> {
    let max_trials = want.saturating_mul(1000).max(1000);
    let (mut got, mut trial, mut incomplete) = (0u64, 0u64, 0u64);
    while got < want {
        if trial >= max_trials {
            return Err(HarnessError::Resource(format!(
                "only {got} of {want} samples after {trial} runs of {cap} steps"
            )));
        }
        let mut sim = Simulator::new(&d.automaton, &d.flags, trial_seed(seed, trial))?;
        trial += 1;
        let mut start = sim.state().pebbles[0].coords()[2..4].to_vec();
        let mut moves = 0;
        let mut completed_any = false;
        for _ in 0..cap {
            let ev = sim.advance();
            if ev.carried != 0 {
                moves += 1;
                if moves == block {
                    let now = sim.state().pebbles[0].coords()[2..4].to_vec();
                    sink(vec![now[0] - start[0], now[1] - start[1]]);
                    got += 1;
                    completed_any = true;
                    moves = 0;
                    start = now;
                    if got == want {
                        break;
                    }
                }
            }
        }
        if !completed_any {
            incomplete += 1;
        }
    }
    Ok((trial, incomplete))
}

/// Position law at a checkpoint against the exact simple-walk DP.
///
/// * `z2`: robot position after `checkpoint` program moves, one sample per
///   trial.
/// * `walk-zK`: walker position after `checkpoint` steps.
/// * `z4`: pebble displacement in the `(e3, e4)` plane over `checkpoint`
///   pebble moves; runs are capped at `cfg.budget` automaton steps and
///   `cfg.trials` samples are collected.
pub fn distribution_experiment(cfg: &ExperimentConfig, checkpoint: u64) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    if checkpoint > MAX_DISTRIBUTION_CHECKPOINT {
        return Err(HarnessError::Resource(format!(
            "checkpoint {checkpoint} exceeds {MAX_DISTRIBUTION_CHECKPOINT}"
        )));
    }
    let (observable, walk_dim) = match cfg.target {
        Target::Program(ProgramKind::Z2) => ("robot position after program moves", 2),
        Target::Program(ProgramKind::Z4) => ("pebble (e3,e4) displacement over pebble moves", 2),
        Target::Walk(d) => ("walker position after steps", d),
        Target::Program(k) => {
            return Err(HarnessError::Invalid(format!(
                "no exact position law for {k}; use z2, z4 or walk-zK"
            )))
        }
    };
    let report =
        |r: DistributionResults| ExperimentReport::new("distribution", Some(cfg.clone()), Results::Distribution(r));
    if checkpoint == 0 {
        return Ok(report(DistributionResults {
            observable,
            checkpoint,
            samples: 0,
            trials_used: 0,
            incomplete_trials: 0,
            skipped: true,
            outside_support: 0,
            chi_square: None,
            passed: true,
            bins: vec![DistributionBin {
                point: vec![0; walk_dim],
                observed: 0,
                expected: 1.0,
            }],
        }));
    }
    let grid = dp_step_distribution(&WalkSpec::simple(walk_dim), checkpoint, checkpoint, cfg.mode)?;
    let support = grid.support();
    let slot: FxHashMap<Vec<i64>, usize> = support.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
    let mut observed = vec![0u64; support.len()];
    let mut outside = 0u64;
    let mut record = |x: Vec<i64>| match slot.get(&x) {
        Some(&i) => observed[i] += 1,
        None => outside += 1,
    };

    let (samples, trials_used, incomplete) = match cfg.target {
        Target::Program(ProgramKind::Z4) => {
            let d = ProgramKind::Z4.build();
            let (used, inc) = pebble_blocks(&d, checkpoint, cfg.trials, cfg.budget.max(1), cfg.seed, &mut record)?;
            (cfg.trials, used, inc)
        }
        Target::Program(_) => {
            let d = ProgramKind::Z2.build();
            for i in 0..cfg.trials {
                let mut sim = Simulator::new(&d.automaton, &d.flags, trial_seed(cfg.seed, i))?;
                let mut moves = 0;
                while moves < checkpoint {
                    let ev = sim.advance();
                    if !ev.mv.dir.is_zero() && d.automaton.state(ev.from).role == StateRole::Program {
                        moves += 1;
                    }
                }
                record(sim.state().robot.coords().to_vec());
            }
            (cfg.trials, cfg.trials, 0)
        }
        Target::Walk(d) => {
            for i in 0..cfg.trials {
                let mut lane = WalkLane::new(d, trial_seed(cfg.seed, i));
                for _ in 0..checkpoint {
                    lane.step();
                }
                record(lane.pos.clone());
            }
            (cfg.trials, cfg.trials, 0)
        }
    };

    let probs: Vec<f64> = support.iter().map(|p| grid.mass_f64(p)).collect();
    let chi = chi_square(&observed, &probs);
    let passed = chi.passed && outside == 0;
    let bins = support
        .into_iter()
        .zip(observed.iter().zip(&probs))
        .map(|(point, (&o, &p))| DistributionBin {
            point,
            observed: o,
            expected: p * samples as f64,
        })
        .collect();
    Ok(report(DistributionResults {
        observable,
        checkpoint,
        samples,
        trials_used,
        incomplete_trials: incomplete,
        skipped: false,
        outside_support: outside,
        chi_square: Some(chi),
        passed,
        bins,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementResults {
    pub events: u64,
    pub trials_used: u64,
    pub counts: BTreeMap<String, u64>,
    pub chi_square: ChiSquare,
}

/// Direction of each pebble move of `z4`, against the uniform law on
/// `±e3, ±e4`. Collects `cfg.trials` moves from runs capped at
/// `cfg.budget` automaton steps.
pub fn increment_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    if cfg.target != Target::Program(ProgramKind::Z4) {
        return Err(HarnessError::Invalid("pebble increments are defined for z4".into()));
    }
    let d = ProgramKind::Z4.build();
    let names = ["+e3", "-e3", "+e4", "-e4"];
    let mut counts = [0u64; 4];
    let (used, _) = pebble_blocks(&d, 1, cfg.trials, cfg.budget.max(1), cfg.seed, |v| {
        let i = match (v[0], v[1]) {
            (1, 0) => 0,
            (-1, 0) => 1,
            (0, 1) => 2,
            (0, -1) => 3,
            other => unreachable!("pebble moved by {other:?}"),
        };
        counts[i] += 1;
    })?;
    let chi = chi_square(&counts, &[0.25; 4]);
    let results = IncrementResults {
        events: cfg.trials,
        trials_used: used,
        counts: names.iter().map(|n| n.to_string()).zip(counts).collect(),
        chi_square: chi,
    };
    Ok(ExperimentReport::new(
        "increments",
        Some(cfg.clone()),
        Results::Increments(results),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlagChoiceResults {
    pub events: u64,
    pub counts: BTreeMap<String, u64>,
    /// Absorption probabilities of the compiled choice, exact.
    pub exact: BTreeMap<String, String>,
    pub exact_match: bool,
    pub zero_displacement: bool,
    pub mean_steps: f64,
    pub chi_square: ChiSquare,
}

/// Starts `cfg.trials` independent lanes with the robot one `loop+e5` move
/// away from the pebble on the flag plane, and records which of the five
/// `Z^8` flag moves each lane commits to.
pub fn flag_choice_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    if cfg.target != Target::Program(ProgramKind::Z8) {
        return Err(HarnessError::Invalid(
            "the five-way flag choice is defined for z8".into(),
        ));
    }
    let d = ProgramKind::Z8.build();
    let a = &d.automaton;
    let gadget = d
        .gadgets
        .iter()
        .find(|g| g.branches.len() == 5)
        .expect("z8 has a five-way gadget");
    let v = verify_gadget(a, gadget)?;
    let outcome_names: Vec<String> = gadget.branches.iter().map(|b| a.state(b.target).name.clone()).collect();
    let exact: BTreeMap<String, String> = v
        .computed
        .iter()
        .map(|(s, p)| (a.state(*s).name.clone(), p.to_string()))
        .collect();

    let mut start = a.initial_state();
    let mut robot = vec![0; 8];
    robot[4] = -1;
    start.robot = LatticePoint::new(robot).expect("in range");
    start.state = d.state("loop+e5");
    let mut counts: BTreeMap<String, u64> = outcome_names.iter().map(|n| (n.clone(), 0)).collect();
    let mut steps = 0u64;
    for i in 0..cfg.trials {
        let mut sim = Simulator::from_state(a, &d.flags, start.clone(), RngStream::new(trial_seed(cfg.seed, i)))?;
        loop {
            sim.advance();
            steps += 1;
            let q = sim.state().state;
            if a.state(q).role == StateRole::Program {
                let name = &a.state(q).name;
                *counts
                    .get_mut(name)
                    .ok_or_else(|| HarnessError::Invalid(format!("flag choice left for `{name}`")))? += 1;
                break;
            }
        }
    }
    let observed: Vec<u64> = counts.values().copied().collect();
    let chi = chi_square(&observed, &vec![0.2; observed.len()]);
    let results = FlagChoiceResults {
        events: cfg.trials,
        counts,
        exact,
        exact_match: v.exact_match,
        zero_displacement: v.displacement.is_ok(),
        mean_steps: steps as f64 / cfg.trials as f64,
        chi_square: chi,
    };
    Ok(ExperimentReport::new(
        "flag-choice",
        Some(cfg.clone()),
        Results::FlagChoice(results),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResults {
    pub steps: u64,
    pub lattice_moves: u64,
    pub flag_hits: u64,
    pub visited_count: usize,
    /// Sorted; omitted when larger than the listing cap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visited: Option<Vec<Vec<i64>>>,
    pub final_robot: Vec<i64>,
    pub final_pebbles: Vec<Vec<i64>>,
    pub final_state: String,
    pub pebble_moves: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<StepRecord>>,
}

/// One run of `budget` automaton steps.
pub fn simulate(
    a: &RobotAutomaton,
    flags: &FlagSet,
    budget: u64,
    seed: u64,
    keep_log: bool,
) -> Result<SimulationResults, HarnessError> {
    let t = run(a, flags, budget, seed, keep_log)?;
    let visited_count = t.visited.len();
    let visited = (visited_count <= VISITED_LIST_CAP).then(|| {
        let mut v: Vec<Vec<i64>> = t.visited.iter().map(|p| p.coords().to_vec()).collect();
        v.sort();
        v
    });
    Ok(SimulationResults {
        steps: budget,
        lattice_moves: t.lattice_moves,
        flag_hits: t.flag_hits,
        visited_count,
        visited,
        final_robot: t.final_state.robot.coords().to_vec(),
        final_pebbles: t.final_state.pebbles.iter().map(|p| p.coords().to_vec()).collect(),
        final_state: a.state(t.final_state.state).name.clone(),
        pebble_moves: t.pebble_trails.iter().map(|tr| tr.len() as u64 - 1).sum(),
        trajectory: t.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walks::ArithmeticMode;

    #[test]
    fn checkpoints() {
        assert_eq!(default_checkpoints(0), vec![0]);
        assert_eq!(default_checkpoints(1), vec![1]);
        assert_eq!(default_checkpoints(1000), vec![1, 10, 100, 1000]);
        assert_eq!(default_checkpoints(2500), vec![1, 10, 100, 1000, 2500]);
    }

    #[test]
    fn zero_budget_covers_only_the_origin() {
        let cfg = ExperimentConfig::new(Target::Program(ProgramKind::Z2))
            .budget(0)
            .trials(3);
        let r = coverage_experiment(&cfg, &default_checkpoints(0)).unwrap();
        let Results::Coverage(c) = r.results else { panic!() };
        assert_eq!(c.ball_size, 13);
        assert_eq!(c.checkpoints.len(), 1);
        assert!((c.checkpoints[0].mean_coverage - 1.0 / 13.0).abs() < 1e-15);
    }

    #[test]
    fn coverage_is_monotone() {
        for t in [
            Target::Program(ProgramKind::Z2),
            Target::Program(ProgramKind::Z6),
            Target::Walk(2),
        ] {
            let cfg = ExperimentConfig::new(t).budget(3000).trials(5).radius(3);
            let r = coverage_experiment(&cfg, &default_checkpoints(3000)).unwrap();
            let Results::Coverage(c) = r.results else { panic!() };
            assert!(c.monotone);
            for w in c.checkpoints.windows(2) {
                assert!(w[0].mean_coverage <= w[1].mean_coverage);
            }
        }
    }

    #[test]
    fn coverage_guard() {
        let cfg = ExperimentConfig::new(Target::Program(ProgramKind::Z8))
            .radius(40)
            .trials(10);
        assert!(matches!(
            coverage_experiment(&cfg, &[1]),
            Err(HarnessError::Resource(_))
        ));
    }

    #[test]
    fn line_returns_match_exact_cdf() {
        let cfg = ExperimentConfig::new(Target::Walk(1))
            .budget(10_000)
            .trials(2000)
            .seed(17);
        let r = return_experiment(&cfg, &default_checkpoints(10_000)).unwrap();
        let Results::Returns(ret) = r.results else { panic!() };
        let o = ret.oracle.unwrap();
        assert_eq!(o.checkpoint, 100);
        assert!(o.check.passed, "{o:?}");
        assert!(ret.lower_bound.unwrap().exceeded);
        for w in ret.cdf.windows(2) {
            assert!(w[0].returned <= w[1].returned);
        }
    }

    #[test]
    fn z2_program_returns_match_planar_walk() {
        let cfg = ExperimentConfig::new(Target::Program(ProgramKind::Z2))
            .budget(100)
            .trials(1000);
        let r = return_experiment(&cfg, &[]).unwrap();
        let Results::Returns(ret) = r.results else { panic!() };
        assert!(ret.oracle.unwrap().check.passed);
    }

    #[test]
    fn distribution_checkpoint_zero_is_skipped() {
        let cfg = ExperimentConfig::new(Target::Program(ProgramKind::Z2));
        let r = distribution_experiment(&cfg, 0).unwrap();
        let Results::Distribution(d) = r.results else { panic!() };
        assert!(d.skipped);
    }

    #[test]
    fn small_distribution_runs() {
        let cfg = ExperimentConfig::new(Target::Program(ProgramKind::Z2)).trials(5000);
        let r = distribution_experiment(&cfg, 4).unwrap();
        let Results::Distribution(d) = r.results else { panic!() };
        assert_eq!(d.outside_support, 0);
        assert!(d.passed, "{:?}", d.chi_square);

        let cfg = ExperimentConfig::new(Target::Program(ProgramKind::Z4))
            .trials(2000)
            .budget(300);
        let r = distribution_experiment(&cfg, 2).unwrap();
        let Results::Distribution(d) = r.results else { panic!() };
        assert_eq!(d.outside_support, 0);
        assert!(d.passed, "{:?}", d.chi_square);
        assert!(distribution_experiment(&ExperimentConfig::new(Target::Program(ProgramKind::Z6)), 2).is_err());
    }

    #[test]
    fn flag_choice_small() {
        let cfg = ExperimentConfig::new(Target::Program(ProgramKind::Z8))
            .trials(2000)
            .mode(ArithmeticMode::Rational);
        let r = flag_choice_experiment(&cfg).unwrap();
        let Results::FlagChoice(f) = r.results else { panic!() };
        assert!(f.exact_match && f.zero_displacement);
        assert_eq!(f.counts.values().sum::<u64>(), 2000);
        assert!(f.exact.values().all(|p| p == "1/5"));
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = ExperimentConfig::new(Target::Program(ProgramKind::Z4))
            .budget(2000)
            .trials(4);
        let a = coverage_experiment(&cfg, &default_checkpoints(2000)).unwrap().to_json();
        let b = coverage_experiment(&cfg, &default_checkpoints(2000)).unwrap().to_json();
        assert_eq!(a, b);
        assert!(a.contains("\"schema_version\": 1"));
    }
}
