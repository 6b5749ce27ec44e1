use std::collections::HashSet;

use serde::Serialize;

use crate::lattice::{FlagSet, LatticeError, LatticePoint};

use super::model::{step_in_place, Observation, RobotAutomaton, StateRole, StepEvent, SystemState};
use super::rng::RngStream;
use super::AutomatonError;

/// A single simulation lane: one configuration plus its bit stream.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    automaton: &'a RobotAutomaton,
    flags: &'a FlagSet,
    sys: SystemState,
    rng: RngStream,
}

impl<'a> Simulator<'a> {
    pub fn new(automaton: &'a RobotAutomaton, flags: &'a FlagSet, seed: u64) -> Result<Self, AutomatonError> {
        Self::from_state(automaton, flags, automaton.initial_state(), RngStream::new(seed))
    }

    pub fn from_state(
        automaton: &'a RobotAutomaton,
        flags: &'a FlagSet,
        sys: SystemState,
        rng: RngStream,
    ) -> Result<Self, AutomatonError> {
        if let FlagSet::Subspace(s) = flags {
            if s.dim() != automaton.dim() {
                return Err(LatticeError::DimensionMismatch {
                    expected: automaton.dim(),
                    found: s.dim(),
                }
                .into());
            }
        }
        if sys.robot.dim() != automaton.dim()
            || sys.pebbles.len() != automaton.pebbles()
            || sys.state >= automaton.len()
        {
            return Err(AutomatonError::Invalid(
                "system state does not fit the automaton".into(),
            ));
        }
        Ok(Simulator {
            automaton,
            flags,
            sys,
            rng,
        })
    }

    pub fn state(&self) -> &SystemState {
        &self.sys
    }

    pub fn automaton(&self) -> &RobotAutomaton {
        self.automaton
    }

    #[inline]
    pub fn advance(&mut self) -> StepEvent {
        let bit = self.rng.next_bit();
        step_in_place(&mut self.sys, self.automaton, self.flags, bit).expect("dimensions checked on construction")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub step: u64,
    pub state: String,
    pub robot: LatticePoint,
    pub pebbles: Vec<LatticePoint>,
    /// Observation that selected `state`; absent for the initial record.
    pub observation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    /// Every cell the robot occupied, including the origin.
    pub visited: HashSet<LatticePoint>,
    /// Pebble positions, appended each time a pebble moves.
    pub pebble_trails: Vec<Vec<LatticePoint>>,
    /// Steps whose post-move cell was flagged.
    pub flag_hits: u64,
    /// Non-zero moves executed by program (non-gadget) states.
    pub lattice_moves: u64,
    pub final_state: SystemState,
    pub log: Option<Vec<StepRecord>>,
}

fn record(a: &RobotAutomaton, sys: &SystemState, w: Option<Observation>) -> StepRecord {
    StepRecord {
        step: sys.step,
        state: a.state(sys.state).name.clone(),
        robot: sys.robot.clone(),
        pebbles: sys.pebbles.clone(),
        observation: w.map(|w| w.to_string()),
    }
}

/// Runs `max_steps` steps from the initial configuration. A pure function
/// of its arguments.
pub fn run(
    automaton: &RobotAutomaton,
    flags: &FlagSet,
    max_steps: u64,
    seed: u64,
    keep_log: bool,
) -> Result<Trajectory, AutomatonError> {
    let mut sim = Simulator::new(automaton, flags, seed)?;
    let mut visited = HashSet::from([sim.state().robot.clone()]);
    let mut pebble_trails: Vec<Vec<LatticePoint>> = sim.state().pebbles.iter().map(|p| vec![p.clone()]).collect();
    let mut log = keep_log.then(|| vec![record(automaton, sim.state(), None)]);
    let mut flag_hits = 0;
    let mut lattice_moves = 0;
    for _ in 0..max_steps {
        let ev = sim.advance();
        let sys = sim.state();
        if !ev.mv.dir.is_zero() {
            visited.insert(sys.robot.clone());
            if automaton.state(ev.from).role == StateRole::Program {
                lattice_moves += 1;
            }
        }
        if ev.carried != 0 {
            for (i, trail) in pebble_trails.iter_mut().enumerate() {
                if ev.carried >> i & 1 == 1 {
                    trail.push(sys.pebbles[i].clone());
                }
            }
        }
        if ev.observation.flag() {
            flag_hits += 1;
        }
        if let Some(log) = log.as_mut() {
            log.push(record(automaton, sys, Some(ev.observation)));
        }
    }
    Ok(Trajectory {
        visited,
        pebble_trails,
        flag_hits,
        lattice_moves,
        final_state: sim.state().clone(),
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::compile::compile_rational;
    use crate::automaton::rational::{uniform, RationalBuilder};
    use crate::automaton::Move;
    use crate::lattice::MoveVector;

    fn walker() -> RobotAutomaton {
        let mut b = RationalBuilder::new(2, 0);
        let moves = MoveVector::both_signs(&[0, 1]);
        let start = b.state("start", Move::STAY);
        let ids: Vec<_> = moves.iter().map(|&d| b.state(d.to_string(), Move::walk(d))).collect();
        for &q in ids.iter().chain([&start]) {
            b.on(q, "*", uniform(&ids));
        }
        compile_rational(&b.build(start).unwrap()).unwrap().automaton
    }

    #[test]
    fn zero_budget_is_origin_only() {
        let a = walker();
        let t = run(&a, &FlagSet::Empty, 0, 7, true).unwrap();
        assert_eq!(t.visited, HashSet::from([LatticePoint::origin(2)]));
        assert_eq!(t.log.unwrap().len(), 1);
    }

    #[test]
    fn log_has_budget_plus_one_records() {
        let a = walker();
        let t = run(&a, &FlagSet::Empty, 50, 7, true).unwrap();
        let log = t.log.unwrap();
        assert_eq!(log.len(), 51);
        assert!(log.windows(2).all(|w| w[1].step == w[0].step + 1));
    }

    #[test]
    fn runs_are_reproducible() {
        let a = walker();
        let x = run(&a, &FlagSet::Empty, 10_000, 99, false).unwrap();
        let y = run(&a, &FlagSet::Empty, 10_000, 99, false).unwrap();
        assert_eq!(x, y);
        let z = run(&a, &FlagSet::Empty, 10_000, 100, false).unwrap();
        assert_ne!(x.final_state, z.final_state);
    }

    #[test]
    fn flag_dimension_checked() {
        let a = walker();
        assert!(run(&a, &FlagSet::origin_point(3), 1, 1, false).is_err());
    }
}
