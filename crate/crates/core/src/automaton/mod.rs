//! The maze-robot machine model.
//!
//! A [`RobotAutomaton`] is a finite automaton whose states each carry a move
//! (unit step plus carry mask). Each step executes the current state's move,
//! observes the post-move configuration together with one fair random bit,
//! and picks the successor state from that observation.

mod absorption;
mod compile;
mod format;
mod model;
mod rational;
mod rng;
mod run;

use thiserror::Error;

use crate::lattice::LatticeError;

pub use absorption::{absorption_probabilities, verify_gadget, ChoiceRegion, GadgetVerification};
pub use compile::{check_zero_displacement, compile_rational, ChoiceGadget, CompiledAutomaton, MAX_DENOMINATOR};
pub use format::{parse_automaton, write_automaton, FORMAT_HEADER, FORMAT_VERSION};
pub use model::{
    observe, step, step_in_place, Move, Observation, RobotAutomaton, StateId, StateRole, StateSpec, StepEvent,
    SystemState, MAX_PEBBLES,
};
pub use rational::{
    ratio, uniform, Action, Branch, ObsPattern, RationalAutomaton, RationalBuilder, RationalState, Rule,
};
pub use rng::{trial_seed, RngStream, GENERATOR_ID};
pub use run::{run, Simulator, StepRecord, Trajectory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("{0} pebbles requested, at most {max} supported", max = MAX_PEBBLES)]
    TooManyPebbles(usize),
    #[error("invalid automaton: {0}")]
    Invalid(String),
    #[error("invalid distribution in state `{state}`: {reason}")]
    Distribution { state: String, reason: String },
    #[error("common denominator {0} is too large to compile")]
    DenominatorTooLarge(String),
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("states {0:?} can never reach an exit")]
    Trapped(Vec<String>),
    #[error("state `{0}` is reachable but outside the choice region")]
    Escapes(String),
}
