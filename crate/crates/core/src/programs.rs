//! Traversal programs for `Z^2`, `Z^4`, `Z^6` and `Z^8`, written as
//! rational automata and compiled down to fair-bit machines.
//!
//! State names follow the phase they belong to:
//!
//! * `walk±eI`: the plain walker of `Z^2`.
//! * `away±eI`: pebble-free excursion in the `(e1, e2)` plane, no flag seen.
//! * `seen±eI`: the same excursion after a flagged cell was observed.
//! * `shift±eI`: flag-driven relocation of the pebble in `(e1, e2)`.
//! * `carry±eI`: relocation of the pebble in `(e3, e4)`.
//! * `loop±eI`: pebble-free excursion in `(e5, e6)`.
//! * `hop±eI`, `hold+e7`, `hold-e7`: the five-way move taken on a flag in
//!   `Z^8` (the last two realize the zero move).

use serde::Serialize;

use crate::automaton::{
    compile_rational, uniform, write_automaton, ChoiceGadget, Move, RationalAutomaton, RationalBuilder, RobotAutomaton,
    StateId,
};
use crate::lattice::{AffineSubspace, FlagSet, LatticePoint, MoveVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum ProgramKind {
    Z2,
    Z4,
    Z6,
    Z8,
}

impl ProgramKind {
    pub const ALL: [ProgramKind; 4] = [ProgramKind::Z2, ProgramKind::Z4, ProgramKind::Z6, ProgramKind::Z8];

    pub fn name(self) -> &'static str {
        match self {
            ProgramKind::Z2 => "z2",
            ProgramKind::Z4 => "z4",
            ProgramKind::Z6 => "z6",
            ProgramKind::Z8 => "z8",
        }
    }

    pub fn build(self) -> ProgramDescriptor {
        match self {
            ProgramKind::Z2 => build_z2(),
            ProgramKind::Z4 => build_z4(),
            ProgramKind::Z6 => build_z6(),
            ProgramKind::Z8 => build_z8(),
        }
    }
}

impl std::fmt::Display for ProgramKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ProgramKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProgramKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown program `{s}` (expected z2, z4, z6 or z8)"))
    }
}

#[derive(Debug, Clone)]
pub struct ProgramDescriptor {
    pub kind: ProgramKind,
    pub dim: usize,
    pub pebbles: usize,
    pub flags: FlagSet,
    /// The program before compilation, with exact choice probabilities.
    pub source: RationalAutomaton,
    pub automaton: RobotAutomaton,
    pub gadgets: Vec<ChoiceGadget>,
}

impl ProgramDescriptor {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// The rational program in the automaton file format.
    pub fn source_text(&self) -> String {
        write_automaton(&self.source)
    }

    /// The compiled fair-bit automaton in the automaton file format.
    pub fn compiled_text(&self) -> String {
        write_automaton(&self.automaton.to_rational())
    }

    pub fn state(&self, name: &str) -> StateId {
        self.automaton
            .find(name)
            .unwrap_or_else(|| panic!("{} has no state `{name}`", self.name()))
    }

    /// States of a phase, e.g. `"carry"`.
    pub fn phase(&self, prefix: &str) -> Vec<StateId> {
        (0..self.automaton.len())
            .filter(|&q| {
                let n = &self.automaton.state(q).name;
                n.strip_prefix(prefix)
                    .is_some_and(|r| r.starts_with('+') || r.starts_with('-'))
            })
            .collect()
    }
}

fn finish(
    kind: ProgramKind,
    dim: usize,
    pebbles: usize,
    flags: FlagSet,
    b: RationalBuilder,
    start: StateId,
) -> ProgramDescriptor {
    let source = b.build(start).expect("program is well formed");
    let compiled = compile_rational(&source).expect("program compiles");
    ProgramDescriptor {
        kind,
        dim,
        pebbles,
        flags,
        source,
        automaton: compiled.automaton,
        gadgets: compiled.gadgets,
    }
}

/// Declares `prefix±eI` for the given 0-based axes.
fn phase(b: &mut RationalBuilder, prefix: &str, axes: &[usize], carry: u32) -> Vec<StateId> {
    MoveVector::both_signs(axes)
        .into_iter()
        .map(|d| b.state(format!("{prefix}{d}"), Move::carrying(d, carry)))
        .collect()
}

fn all(b: &mut RationalBuilder, states: &[StateId], pattern: &str, targets: &[StateId]) {
    for &q in states {
        b.on(q, pattern, uniform(targets));
    }
}

/// Simple random walk on `Z^2`.
pub fn build_z2() -> ProgramDescriptor {
    let mut b = RationalBuilder::new(2, 0);
    let start = b.state("start", Move::STAY);
    let walk = phase(&mut b, "walk", &[0, 1], 0);
    all(&mut b, &[start], "*", &walk);
    all(&mut b, &walk, "*", &walk);
    finish(ProgramKind::Z2, 2, 0, FlagSet::Empty, b, start)
}

/// Leaves the pebble, walks in `(e1, e2)` until it is back on the pebble,
/// then moves with the pebble along one of `±e3, ±e4`.
pub fn build_z4() -> ProgramDescriptor {
    let mut b = RationalBuilder::new(4, 1);
    let start = b.state("start", Move::STAY);
    let away = phase(&mut b, "away", &[0, 1], 0);
    let carry = phase(&mut b, "carry", &[2, 3], 1);
    all(&mut b, &[start], "*", &away);
    all(&mut b, &away, "1**", &carry);
    all(&mut b, &away, "*", &away);
    all(&mut b, &carry, "*", &away);
    finish(ProgramKind::Z4, 4, 1, FlagSet::Empty, b, start)
}

struct Z6Phases {
    start: StateId,
    away: Vec<StateId>,
    lp: Vec<StateId>,
}

fn z6_phases(b: &mut RationalBuilder) -> Z6Phases {
    let start = b.state("start", Move::STAY);
    let away = phase(b, "away", &[0, 1], 0);
    let seen = phase(b, "seen", &[0, 1], 0);
    let shift = phase(b, "shift", &[0, 1], 1);
    let carry = phase(b, "carry", &[2, 3], 1);
    let lp = phase(b, "loop", &[4, 5], 0);
    all(b, &[start], "*", &away);
    // Observation bits: pebble, flag, random. The cell reached by a move
    // counts as visited during the excursion, including the pebble cell.
    all(b, &away, "11*", &shift);
    all(b, &away, "10*", &carry);
    all(b, &away, "01*", &seen);
    all(b, &away, "*", &away);
    all(b, &seen, "1**", &shift);
    all(b, &seen, "*", &seen);
    all(b, &shift, "*", &carry);
    all(b, &carry, "*", &lp);
    Z6Phases { start, away, lp }
}

/// Pebble plus a single flag at the origin. After an `(e1, e2)` excursion the
/// pebble moves along `±e3, ±e4` if no flag was seen, and otherwise first
/// along `±e1, ±e2` and then along `±e3, ±e4`. Every relocation is followed
/// by an `(e5, e6)` excursion back to the pebble.
pub fn build_z6() -> ProgramDescriptor {
    let mut b = RationalBuilder::new(6, 1);
    let p = z6_phases(&mut b);
    all(&mut b, &p.lp, "1**", &p.away);
    all(&mut b, &p.lp, "*", &p.lp);
    let flags = FlagSet::Subspace(AffineSubspace::point(LatticePoint::origin(6)));
    finish(ProgramKind::Z6, 6, 1, flags, b, p.start)
}

/// The `Z^6` program in `Z^8` with the flag plane `x1 = ... = x6 = 0`. When
/// the `(e5, e6)` excursion ends on the pebble and the cell is flagged, the
/// robot takes the pebble along one of `±e7, ±e8` or stays, each with
/// probability 1/5; staying is `+e7` followed by `-e7`.
pub fn build_z8() -> ProgramDescriptor {
    let mut b = RationalBuilder::new(8, 1);
    let p = z6_phases(&mut b);
    let hop = phase(&mut b, "hop", &[6, 7], 1);
    let hold_out = b.state("hold+e7", Move::carrying(MoveVector::Plus(6), 1));
    let hold_back = b.state("hold-e7", Move::carrying(MoveVector::Minus(6), 1));
    let mut five = hop.clone();
    five.push(hold_out);
    all(&mut b, &p.lp, "11*", &five);
    all(&mut b, &p.lp, "1**", &p.away);
    all(&mut b, &p.lp, "*", &p.lp);
    all(&mut b, &hop, "*", &p.away);
    all(&mut b, &[hold_out], "*", &[hold_back]);
    all(&mut b, &[hold_back], "*", &p.away);
    let plane = AffineSubspace::coordinate_plane(LatticePoint::origin(8), &[6, 7]).expect("axes in range");
    finish(ProgramKind::Z8, 8, 1, FlagSet::Subspace(plane), b, p.start)
}
