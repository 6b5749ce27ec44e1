//! Random walks on `Z^k`: exact step-distribution convolution, the closed
//! forms and bounds for the simple walk on `Z^3`, mixture walks, and a
//! series-based recurrence classifier.

mod grid;
mod recurrence;
mod spec;
mod z3;

use thiserror::Error;

pub use grid::{
    ball_size, dp_step_distribution, mixture_distribution, parse_grid, DistributionGrid, GRID_HEADER, MAX_GRID_POINTS,
};
pub use recurrence::{
    classify_recurrence, first_return_cdf, origin_return_series, return_lower_bound, ProbSeries, RecurrenceReport,
    Verdict, MIN_FIT_POINTS,
};
pub use spec::{ArithmeticMode, MixtureSpec, WalkSpec};
pub use z3::{
    balanced_parts, max_multinomial, shifted_bound_check, shifted_bound_sweep, stirling_asymptotic,
    z3_origin_return_exact, z3_upper_bound, ShiftedCase,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WalkError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid walk: {0}")]
    Invalid(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("grid parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

// Points are packed 16 bits per coordinate with an offset, so a step is a
// plain integer addition on the key.
const OFFSET: i64 = 1 << 15;
pub(crate) const MAX_COORD: u64 = (OFFSET - 1) as u64;
pub(crate) const MAX_DIM: usize = 8;

pub(crate) fn pack(x: &[i64]) -> u128 {
    x.iter()
        .enumerate()
        .fold(0u128, |k, (i, &c)| k | (((c + OFFSET) as u128) << (16 * i)))
}

pub(crate) fn unpack(key: u128, dim: usize) -> Vec<i64> {
    (0..dim).map(|i| ((key >> (16 * i)) & 0xFFFF) as i64 - OFFSET).collect()
}

pub(crate) fn pack_delta(v: &[i64]) -> u128 {
    v.iter()
        .enumerate()
        .fold(0i128, |k, (i, &c)| k + ((c as i128) << (16 * i))) as u128
}

pub(crate) fn key_l1(key: u128, dim: usize) -> u64 {
    (0..dim)
        .map(|i| (((key >> (16 * i)) & 0xFFFF) as i64 - OFFSET).unsigned_abs())
        .sum()
}

pub(crate) fn negate_key(key: u128, dim: usize) -> u128 {
    let x: Vec<i64> = unpack(key, dim).into_iter().map(|c| -c).collect();
    pack(&x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_round_trips_and_adds() {
        let x = [3, -7, 0, 12];
        let v = [-1, 1, 0, -5];
        let k = pack(&x);
        assert_eq!(unpack(k, 4), x);
        assert_eq!(unpack(k.wrapping_add(pack_delta(&v)), 4), vec![2, -6, 0, 7]);
        assert_eq!(key_l1(k, 4), 22);
        assert_eq!(unpack(negate_key(k, 4), 4), vec![-3, 7, 0, -12]);
    }
}
