//! Integer-lattice geometry on `Z^k`: points, unit moves, the L1 metric and
//! affine sublattices used for flag sets.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("lattice dimension must be at least 1")]
    ZeroDimension,
    #[error("basis vectors are linearly dependent")]
    DependentBasis,
    #[error("invalid move vector `{0}`")]
    BadMove(String),
}

fn check_dim(expected: usize, found: usize) -> Result<(), LatticeError> {
    if expected == found {
        Ok(())
    } else {
        Err(LatticeError::DimensionMismatch { expected, found })
    }
}

/// A cell of `Z^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Result<Self, LatticeError> {
        if coords.is_empty() {
            return Err(LatticeError::ZeroDimension);
        }
        Ok(LatticePoint(coords))
    }

    /// The all-zero point of `Z^dim`.
    pub fn origin(dim: usize) -> Self {
        assert!(dim >= 1, "lattice dimension must be at least 1");
        LatticePoint(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn l1_norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    /// Applies a unit move in place.
    pub fn shift(&mut self, mv: MoveVector) {
        if let Some((axis, sign)) = mv.axis_sign() {
            self.0[axis] += sign;
        }
    }

    pub fn shifted(&self, mv: MoveVector) -> Self {
        let mut p = self.clone();
        p.shift(mv);
        p
    }
}

impl From<&[i64]> for LatticePoint {
    fn from(c: &[i64]) -> Self {
        LatticePoint::new(c.to_vec()).expect("non-empty coordinates")
    }
}

impl<const K: usize> From<[i64; K]> for LatticePoint {
    fn from(c: [i64; K]) -> Self {
        LatticePoint::new(c.to_vec()).expect("non-empty coordinates")
    }
}

impl Add for &LatticePoint {
    type Output = LatticePoint;

    fn add(self, rhs: &LatticePoint) -> LatticePoint {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in point addition");
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LatticePoint {
    type Output = LatticePoint;

    fn sub(self, rhs: &LatticePoint) -> LatticePoint {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in point subtraction");
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &LatticePoint {
    type Output = LatticePoint;

    fn neg(self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|c| -c).collect())
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// `Σ |a_i - b_i|`, the city-block metric.
pub fn l1_distance(a: &LatticePoint, b: &LatticePoint) -> Result<u64, LatticeError> {
    check_dim(a.dim(), b.dim())?;
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| x.abs_diff(*y)).sum())
}

/// A unit step `±e_i` or the zero vector. Axes are 0-based internally and
/// printed 1-based (`+e1`, `-e3`, `0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MoveVector {
    Zero,
    Plus(usize),
    Minus(usize),
}

impl MoveVector {
    pub fn axis_sign(self) -> Option<(usize, i64)> {
        match self {
            MoveVector::Zero => None,
            MoveVector::Plus(a) => Some((a, 1)),
            MoveVector::Minus(a) => Some((a, -1)),
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            MoveVector::Zero => MoveVector::Zero,
            MoveVector::Plus(a) => MoveVector::Minus(a),
            MoveVector::Minus(a) => MoveVector::Plus(a),
        }
    }

    pub fn is_zero(self) -> bool {
        self == MoveVector::Zero
    }

    /// Largest axis index touched plus one (0 for the zero move).
    pub fn min_dim(self) -> usize {
        self.axis_sign().map_or(0, |(a, _)| a + 1)
    }

    pub fn to_point(self, dim: usize) -> LatticePoint {
        LatticePoint::origin(dim).shifted(self)
    }

    /// `+e_{axis}` and `-e_{axis}` for each of the given 0-based axes.
    pub fn both_signs(axes: &[usize]) -> Vec<MoveVector> {
        axes.iter()
            .flat_map(|&a| [MoveVector::Plus(a), MoveVector::Minus(a)])
            .collect()
    }
}

impl fmt::Display for MoveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MoveVector::Zero => write!(f, "0"),
            MoveVector::Plus(a) => write!(f, "+e{}", a + 1),
            MoveVector::Minus(a) => write!(f, "-e{}", a + 1),
        }
    }
}

impl FromStr for MoveVector {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "0" {
            return Ok(MoveVector::Zero);
        }
        let bad = || LatticeError::BadMove(s.to_string());
        let (sign, rest) = match s.as_bytes().first() {
            Some(b'+') => (1, &s[1..]),
            Some(b'-') => (-1, &s[1..]),
            _ => (1, s),
        };
        let idx: usize = rest.strip_prefix('e').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if idx == 0 {
            return Err(bad());
        }
        Ok(if sign > 0 {
            MoveVector::Plus(idx - 1)
        } else {
            MoveVector::Minus(idx - 1)
        })
    }
}

/// `base + span_Z(basis)`.
///
/// Membership is decided exactly: the basis is kept in integer row-echelon
/// form (built with unimodular row operations, so the generated lattice is
/// unchanged) and a candidate offset is reduced against it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineSubspace {
    base: LatticePoint,
    basis: Vec<Vec<i64>>,
    echelon: Vec<(usize, Vec<i128>)>,
}

impl AffineSubspace {
    pub fn new(base: LatticePoint, basis: Vec<Vec<i64>>) -> Result<Self, LatticeError> {
        let dim = base.dim();
        for v in &basis {
            check_dim(dim, v.len())?;
        }
        let echelon = integer_echelon(&basis, dim);
        if echelon.len() != basis.len() {
            return Err(LatticeError::DependentBasis);
        }
        Ok(AffineSubspace { base, basis, echelon })
    }

    pub fn point(p: LatticePoint) -> Self {
        AffineSubspace::new(p, Vec::new()).expect("empty basis is independent")
    }

    /// The sublattice through `base` spanned by the given coordinate axes.
    pub fn coordinate_plane(base: LatticePoint, axes: &[usize]) -> Result<Self, LatticeError> {
        let dim = base.dim();
        let basis = axes
            .iter()
            .map(|&a| {
                let mut v = vec![0; dim];
                if a >= dim {
                    return Err(LatticeError::DimensionMismatch {
                        expected: dim,
                        found: a + 1,
                    });
                }
                v[a] = 1;
                Ok(v)
            })
            .collect::<Result<Vec<_>, _>>()?;
        AffineSubspace::new(base, basis)
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn base(&self) -> &LatticePoint {
        &self.base
    }

    pub fn basis(&self) -> &[Vec<i64>] {
        &self.basis
    }

    pub fn contains(&self, x: &LatticePoint) -> Result<bool, LatticeError> {
        check_dim(self.dim(), x.dim())?;
        // Called once per simulated step; avoid allocating for small k.
        let mut stack = [0i128; 16];
        let mut heap = Vec::new();
        let r: &mut [i128] = if x.dim() <= stack.len() {
            &mut stack[..x.dim()]
        } else {
            heap.resize(x.dim(), 0);
            &mut heap
        };
        for ((ri, a), b) in r.iter_mut().zip(x.coords()).zip(self.base.coords()) {
            *ri = (*a as i128) - (*b as i128);
        }
        for (pivot, row) in &self.echelon {
            let p = row[*pivot];
            if r[*pivot] % p != 0 {
                return Ok(false);
            }
            let q = r[*pivot] / p;
            if q != 0 {
                for (ri, vi) in r.iter_mut().zip(row) {
                    *ri -= q * vi;
                }
            }
        }
        Ok(r.iter().all(|&c| c == 0))
    }
}

/// Row-echelon form of the integer lattice spanned by `rows`, via the
/// extended Euclidean algorithm on pivot columns. Zero rows are dropped, so
/// the result length is the rank.
fn integer_echelon(rows: &[Vec<i64>], dim: usize) -> Vec<(usize, Vec<i128>)> {
    let mut work: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&c| c as i128).collect()).collect();
    let mut out = Vec::new();
    for col in 0..dim {
        let Some(first) = work.iter().position(|r| r[col] != 0) else {
            continue;
        };
        let mut pivot = work.swap_remove(first);
        for other in work.iter_mut() {
            while other[col] != 0 {
                // Euclid step on the pivot column keeps the span unchanged.
                let q = pivot[col] / other[col];
                for (p, o) in pivot.iter_mut().zip(other.iter()) {
                    *p -= q * o;
                }
                std::mem::swap(&mut pivot, other);
            }
        }
        if pivot[col] < 0 {
            pivot.iter_mut().for_each(|c| *c = -*c);
        }
        out.push((col, pivot));
        work.retain(|r| r.iter().any(|&c| c != 0));
    }
    out
}

/// Rank over the rationals of a list of integer vectors.
pub fn rank(rows: &[Vec<i64>], dim: usize) -> usize {
    integer_echelon(rows, dim).len()
}

/// The set `M` of flagged cells.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum FlagSet {
    #[default]
    Empty,
    Subspace(AffineSubspace),
}

impl FlagSet {
    pub fn contains(&self, x: &LatticePoint) -> Result<bool, LatticeError> {
        match self {
            FlagSet::Empty => Ok(false),
            FlagSet::Subspace(s) => s.contains(x),
        }
    }

    pub fn origin_point(dim: usize) -> Self {
        FlagSet::Subspace(AffineSubspace::point(LatticePoint::origin(dim)))
    }

    pub fn describe(&self) -> String {
        match self {
            FlagSet::Empty => "empty".to_string(),
            FlagSet::Subspace(s) if s.basis().is_empty() => format!("point {}", s.base()),
            FlagSet::Subspace(s) => format!("{} + span{:?}", s.base(), s.basis()),
        }
    }
}

/// All points with `|x|_1 <= radius`, in lexicographic order.
pub fn l1_ball(dim: usize, radius: u64) -> Vec<LatticePoint> {
    fn rec(dim: usize, left: i64, cur: &mut Vec<i64>, out: &mut Vec<LatticePoint>) {
        if cur.len() == dim {
            out.push(LatticePoint(cur.clone()));
            return;
        }
        for c in -left..=left {
            cur.push(c);
            rec(dim, left - c.abs(), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, radius as i64, &mut Vec::with_capacity(dim), &mut out);
    out
}
