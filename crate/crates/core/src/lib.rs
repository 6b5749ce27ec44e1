//! Maze-robot systems on integer lattices: finite automata with a fair
//! random bit, carriable pebbles and flagged cells.
//!
//! * [`lattice`]: points, unit moves, the L1 metric and flag sublattices.
//! * [`automaton`]: the machine model, simulation, the rational-to-coin-flip
//!   compiler with its exact absorption check, and the text file format.
//! * [`walks`]: exact and asymptotic random-walk analytics.
//! * [`programs`]: traversal programs for `Z^2`, `Z^4`, `Z^6` and `Z^8`.
//! * [`harness`]: seeded Monte Carlo experiments and JSON reports.

pub mod automaton;
pub mod harness;
pub mod lattice;
pub mod programs;
pub mod walks;

/// Master seed used when neither `--seed` nor `MAZEBOT_SEED` is given.
pub const DEFAULT_SEED: u64 = 0x5EED_2024;
