use std::collections::VecDeque;
use std::fmt;

use crate::lattice::{FlagSet, LatticeError, LatticePoint, MoveVector};

use super::rng::RngStream;
use super::AutomatonError;

/// Upper bound on pebbles; transition tables have `2^(n+2)` columns.
pub const MAX_PEBBLES: usize = 8;

pub type StateId = usize;

/// The `(n+2)`-bit input of the transition function.
///
/// Bit `i` (0-based, `i < n`) flags pebble `i+1` sharing the robot's cell,
/// bit `n` flags membership of the robot's cell in the flag set and bit
/// `n+1` is the random bit. The packed value indexes transition tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Observation {
    bits: u32,
    pebbles: usize,
}

impl Observation {
    pub fn new(pebbles: usize, bits: u32) -> Self {
        debug_assert!(bits < (1 << (pebbles + 2)));
        Observation { bits, pebbles }
    }

    pub fn compose(pebbles: usize, pebble_mask: u32, on_flag: bool, random_bit: bool) -> Self {
        Observation::new(
            pebbles,
            pebble_mask | (u32::from(on_flag) << pebbles) | (u32::from(random_bit) << (pebbles + 1)),
        )
    }

    pub fn len(&self) -> usize {
        self.pebbles + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn index(&self) -> usize {
        self.bits as usize
    }

    /// Pebble `i` (0-based) is on the robot's cell.
    pub fn pebble(&self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    pub fn flag(&self) -> bool {
        self.bits >> self.pebbles & 1 == 1
    }

    pub fn random_bit(&self) -> bool {
        self.bits >> (self.pebbles + 1) & 1 == 1
    }

    /// Everything except the random bit.
    pub fn env(&self) -> u32 {
        self.bits & !(1 << (self.pebbles + 1))
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            write!(f, "{}", self.bits >> i & 1)?;
        }
        Ok(())
    }
}

/// Per-state move: displacement plus the set of pebbles carried along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Move {
    pub dir: MoveVector,
    /// Bit `i` set: carry pebble `i+1` if it shares the robot's cell.
    pub carry: u32,
}

impl Move {
    pub const STAY: Move = Move {
        dir: MoveVector::Zero,
        carry: 0,
    };

    pub fn walk(dir: MoveVector) -> Self {
        Move { dir, carry: 0 }
    }

    pub fn carrying(dir: MoveVector, carry: u32) -> Self {
        Move { dir, carry }
    }
}

/// Whether a state belongs to the authored program or was generated by the
/// coin-flip compiler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StateRole {
    #[default]
    Program,
    Gadget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpec {
    pub name: String,
    pub mv: Move,
    pub role: StateRole,
}

/// A coin-flip robot automaton `(Q, q0, δ, ξ)` on `Z^dim` with `pebbles`
/// pebbles. Moves are attached to states; the observation only selects the
/// successor state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotAutomaton {
    dim: usize,
    pebbles: usize,
    states: Vec<StateSpec>,
    initial: StateId,
    /// Row-major `states.len() × 2^(pebbles+2)`.
    next: Vec<StateId>,
}

impl RobotAutomaton {
    pub fn new(
        dim: usize,
        pebbles: usize,
        states: Vec<StateSpec>,
        initial: StateId,
        next: Vec<StateId>,
    ) -> Result<Self, AutomatonError> {
        if dim == 0 {
            return Err(LatticeError::ZeroDimension.into());
        }
        if pebbles > MAX_PEBBLES {
            return Err(AutomatonError::TooManyPebbles(pebbles));
        }
        let width = 1usize << (pebbles + 2);
        if states.is_empty() || initial >= states.len() {
            return Err(AutomatonError::Invalid("initial state out of range".into()));
        }
        if next.len() != states.len() * width {
            return Err(AutomatonError::Invalid(format!(
                "transition table has {} entries, expected {}",
                next.len(),
                states.len() * width
            )));
        }
        if let Some(bad) = next.iter().find(|&&t| t >= states.len()) {
            return Err(AutomatonError::Invalid(format!("transition to unknown state #{bad}")));
        }
        for s in &states {
            if s.mv.dir.min_dim() > dim {
                return Err(AutomatonError::Invalid(format!(
                    "state `{}` moves along {} outside Z^{dim}",
                    s.name, s.mv.dir
                )));
            }
            if s.mv.carry >> pebbles != 0 {
                return Err(AutomatonError::Invalid(format!(
                    "state `{}` carries a pebble that does not exist",
                    s.name
                )));
            }
        }
        Ok(RobotAutomaton {
            dim,
            pebbles,
            states,
            initial,
            next,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pebbles(&self) -> usize {
        self.pebbles
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn states(&self) -> &[StateSpec] {
        &self.states
    }

    pub fn state(&self, id: StateId) -> &StateSpec {
        &self.states[id]
    }

    pub fn observation_width(&self) -> usize {
        1 << (self.pebbles + 2)
    }

    pub fn find(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s.name == name)
    }

    #[inline]
    pub fn next_state(&self, q: StateId, w: Observation) -> StateId {
        self.next[q * self.observation_width() + w.index()]
    }

    /// Successor row of `q`, indexed by packed observation.
    pub fn row(&self, q: StateId) -> &[StateId] {
        let w = self.observation_width();
        &self.next[q * w..(q + 1) * w]
    }

    pub fn initial_state(&self) -> SystemState {
        SystemState::initial(self.dim, self.pebbles, self.initial)
    }

    /// States reachable from the initial state through any observation.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial] = true;
        while let Some(q) = queue.pop_front() {
            for &t in self.row(q) {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    /// Drops unreachable states. Behavior from the initial state is unchanged.
    pub fn pruned(&self) -> RobotAutomaton {
        let keep = self.reachable();
        let mut remap = vec![usize::MAX; self.len()];
        let mut states = Vec::new();
        for (i, s) in self.states.iter().enumerate() {
            if keep[i] {
                remap[i] = states.len();
                states.push(s.clone());
            }
        }
        let next = (0..self.len())
            .filter(|&i| keep[i])
            .flat_map(|i| self.row(i).iter().map(|&t| remap[t]))
            .collect();
        RobotAutomaton {
            dim: self.dim,
            pebbles: self.pebbles,
            states,
            initial: remap[self.initial],
            next,
        }
    }
}

/// `(a, s_1..s_n, k, q)`: robot cell, pebble cells, step index, automaton state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SystemState {
    pub robot: LatticePoint,
    pub pebbles: Vec<LatticePoint>,
    pub step: u64,
    pub state: StateId,
}

impl SystemState {
    /// Everything at the origin, step index 1.
    pub fn initial(dim: usize, pebbles: usize, q0: StateId) -> Self {
        SystemState {
            robot: LatticePoint::origin(dim),
            pebbles: vec![LatticePoint::origin(dim); pebbles],
            step: 1,
            state: q0,
        }
    }
}

/// Builds the observation for the given configuration.
pub fn observe(sys: &SystemState, flags: &FlagSet, random_bit: bool) -> Result<Observation, LatticeError> {
    let n = sys.pebbles.len();
    let mut bits = 0u32;
    for (i, s) in sys.pebbles.iter().enumerate() {
        if *s == sys.robot {
            bits |= 1 << i;
        }
    }
    if flags.contains(&sys.robot)? {
        bits |= 1 << n;
    }
    if random_bit {
        bits |= 1 << (n + 1);
    }
    Ok(Observation::new(n, bits))
}

/// What happened during one step, besides the new configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepEvent {
    pub from: StateId,
    pub mv: Move,
    /// Pebbles that actually moved with the robot.
    pub carried: u32,
    pub observation: Observation,
}

/// Applies one move in place, with an explicit random bit.
///
/// The move of the current state is executed first; pebbles travel only if
/// their carry bit is set and they shared the robot's pre-move cell. The
/// observation is then taken on the post-move configuration.
pub fn step_in_place(
    sys: &mut SystemState,
    automaton: &RobotAutomaton,
    flags: &FlagSet,
    random_bit: bool,
) -> Result<StepEvent, LatticeError> {
    let from = sys.state;
    let mv = automaton.state(from).mv;
    let mut carried = 0u32;
    if mv.carry != 0 {
        for (i, s) in sys.pebbles.iter_mut().enumerate() {
            if mv.carry >> i & 1 == 1 && *s == sys.robot {
                s.shift(mv.dir);
                carried |= 1 << i;
            }
        }
    }
    sys.robot.shift(mv.dir);
    let w = observe(sys, flags, random_bit)?;
    sys.state = automaton.next_state(from, w);
    sys.step += 1;
    Ok(StepEvent {
        from,
        mv,
        carried,
        observation: w,
    })
}

/// Pure single step drawing `ξ_k` from `rng`.
pub fn step(
    sys: &SystemState,
    automaton: &RobotAutomaton,
    flags: &FlagSet,
    rng: &mut RngStream,
) -> Result<SystemState, LatticeError> {
    let mut next = sys.clone();
    step_in_place(&mut next, automaton, flags, rng.next_bit())?;
    Ok(next)
}
