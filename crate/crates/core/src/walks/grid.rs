use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rustc_hash::FxHashMap;

use super::spec::{ArithmeticMode, MixtureSpec, WalkSpec};
use super::{key_l1, pack, pack_delta, unpack, WalkError, MAX_COORD, MAX_DIM};

pub const GRID_HEADER: &str = "mazebot-grid 1";

/// Upper limit on the number of lattice points a single grid may need.
pub const MAX_GRID_POINTS: u64 = 40_000_000;

/// Scalar used by the convolution: integer counts over a running common
/// denominator, or plain doubles with denominator 1.
pub(crate) trait Scalar: Clone + PartialEq + std::fmt::Debug {
    fn nil() -> Self;
    fn unit() -> Self;
    fn is_nil(&self) -> bool;
    fn add_mul(&mut self, a: &Self, b: &Self);
    fn mul(&self, b: &Self) -> Self;
}

impl Scalar for BigUint {
    fn nil() -> Self {
        Zero::zero()
    }
    fn unit() -> Self {
        One::one()
    }
    fn is_nil(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        if b.is_one() {
            *self += a;
        } else {
            *self += a * b;
        }
    }
    fn mul(&self, b: &Self) -> Self {
        self * b
    }
}

impl Scalar for f64 {
    fn nil() -> Self {
        0.0
    }
    fn unit() -> Self {
        1.0
    }
    fn is_nil(&self) -> bool {
        *self == 0.0
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn mul(&self, b: &Self) -> Self {
        self * b
    }
}

/// `P(x) = map[x] / denom`; `escaped / denom` left the ball.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Law<S> {
    pub map: FxHashMap<u128, S>,
    pub denom: S,
    pub escaped: S,
}

impl<S: Scalar> Law<S> {
    pub fn point_mass(dim: usize) -> Self {
        let mut map = FxHashMap::default();
        map.insert(pack(&vec![0; dim]), S::unit());
        Law {
            map,
            denom: S::unit(),
            escaped: S::nil(),
        }
    }

    /// One convolution step with `(delta, weight, step_l1)` triples over the
    /// common denominator `d`.
    pub fn step(&self, moves: &[(u128, S, u64)], d: &S, dim: usize, radius: u64) -> Self {
        let mut next: FxHashMap<u128, S> = FxHashMap::default();
        next.reserve(self.map.len() * 2);
        let mut escaped = self.escaped.mul(d);
        for (&k, c) in &self.map {
            let norm = key_l1(k, dim);
            for (delta, w, len) in moves {
                let t = k.wrapping_add(*delta);
                if norm + len > radius && key_l1(t, dim) > radius {
                    escaped.add_mul(c, w);
                } else {
                    next.entry(t).or_insert_with(S::nil).add_mul(c, w);
                }
            }
        }
        next.retain(|_, v| !v.is_nil());
        Law {
            map: next,
            denom: self.denom.mul(d),
            escaped,
        }
    }
}

fn exact_moves(w: &WalkSpec) -> (Vec<(u128, BigUint, u64)>, BigUint) {
    let (nums, d) = w.integer_weights();
    let moves = w
        .steps()
        .iter()
        .zip(nums)
        .map(|((v, _), n)| {
            (
                pack_delta(v),
                n.to_biguint().expect("positive weight"),
                v.iter().map(|c| c.unsigned_abs()).sum(),
            )
        })
        .collect();
    (moves, d.to_biguint().expect("positive denominator"))
}

fn float_moves(w: &WalkSpec) -> Vec<(u128, f64, u64)> {
    w.steps()
        .iter()
        .zip(w.float_weights())
        .map(|((v, _), p)| (pack_delta(v), p, v.iter().map(|c| c.unsigned_abs()).sum()))
        .collect()
}

/// Grid points in the L1 ball of radius `r` in `Z^dim`, computed exactly
/// with saturation.
pub fn ball_size(dim: usize, r: u64) -> u64 {
    // |B(d, r)| = Σ_i 2^i C(d,i) C(r,i)
    let mut total: u64 = 0;
    for i in 0..=dim as u64 {
        let mut c = 1u128;
        for j in 0..i {
            c = c * (dim as u128 - j as u128) / (j as u128 + 1);
        }
        let mut cr = 1u128;
        for j in 0..i {
            if r < i {
                cr = 0;
                break;
            }
            cr = cr.saturating_mul(r as u128 - j as u128) / (j as u128 + 1);
        }
        let term = (c.saturating_mul(cr)).saturating_mul(1u128 << i);
        total = total.saturating_add(term.min(u64::MAX as u128) as u64);
    }
    total
}

pub(crate) fn check_feasible(dim: usize, radius: u64) -> Result<(), WalkError> {
    if dim > MAX_DIM {
        return Err(WalkError::Resource(format!("dimension {dim} exceeds {MAX_DIM}")));
    }
    if radius > MAX_COORD {
        return Err(WalkError::Resource(format!("radius {radius} exceeds {MAX_COORD}")));
    }
    let size = ball_size(dim, radius);
    if size > MAX_GRID_POINTS {
        return Err(WalkError::Resource(format!(
            "ball of radius {radius} in Z^{dim} has {size} points, cap is {MAX_GRID_POINTS}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Values {
    Rational(Law<BigUint>),
    Float(Law<f64>),
}

/// Law of `Y_n` restricted to the L1 ball of radius `radius`; mass that
/// left the ball is kept as `truncation`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionGrid {
    dim: usize,
    radius: u64,
    steps: u64,
    values: Values,
}

impl DistributionGrid {
    pub(crate) fn from_law_rational(dim: usize, radius: u64, steps: u64, law: Law<BigUint>) -> Self {
        DistributionGrid {
            dim,
            radius,
            steps,
            values: Values::Rational(law),
        }
    }

    pub(crate) fn from_law_float(dim: usize, radius: u64, steps: u64, law: Law<f64>) -> Self {
        DistributionGrid {
            dim,
            radius,
            steps,
            values: Values::Float(law),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> u64 {
        self.radius
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn mode(&self) -> ArithmeticMode {
        match self.values {
            Values::Rational(_) => ArithmeticMode::Rational,
            Values::Float(_) => ArithmeticMode::Float,
        }
    }

    /// Exact mass at `x`; `None` for float grids.
    pub fn mass_rational(&self, x: &[i64]) -> Option<BigRational> {
        match &self.values {
            Values::Rational(law) => {
                let c = if x.len() == self.dim && x.iter().all(|c| c.unsigned_abs() <= MAX_COORD) {
                    law.map.get(&pack(x)).cloned().unwrap_or_default()
                } else {
                    BigUint::zero()
                };
                Some(BigRational::new(c.into(), law.denom.clone().into()))
            }
            Values::Float(_) => None,
        }
    }

    pub fn mass_f64(&self, x: &[i64]) -> f64 {
        if x.len() != self.dim || x.iter().any(|c| c.unsigned_abs() > MAX_COORD) {
            return 0.0;
        }
        match &self.values {
            Values::Rational(_) => self.mass_rational(x).and_then(|m| m.to_f64()).unwrap_or(0.0),
            Values::Float(law) => law.map.get(&pack(x)).copied().unwrap_or(0.0),
        }
    }

    pub fn truncation_rational(&self) -> Option<BigRational> {
        match &self.values {
            Values::Rational(law) => Some(BigRational::new(law.escaped.clone().into(), law.denom.clone().into())),
            Values::Float(_) => None,
        }
    }

    pub fn truncation_f64(&self) -> f64 {
        match &self.values {
            Values::Rational(_) => self.truncation_rational().and_then(|m| m.to_f64()).unwrap_or(0.0),
            Values::Float(law) => law.escaped,
        }
    }

    /// Points carrying non-zero mass, sorted.
    pub fn support(&self) -> Vec<Vec<i64>> {
        let mut pts: Vec<Vec<i64>> = match &self.values {
            Values::Rational(law) => law.map.keys().map(|&k| unpack(k, self.dim)).collect(),
            Values::Float(law) => law.map.keys().map(|&k| unpack(k, self.dim)).collect(),
        };
        pts.sort();
        pts
    }

    /// Stored mass plus truncation; exactly one in rational mode.
    pub fn total_rational(&self) -> Option<BigRational> {
        match &self.values {
            Values::Rational(law) => {
                let s: BigUint = law.map.values().sum::<BigUint>() + &law.escaped;
                Some(BigRational::new(s.into(), law.denom.clone().into()))
            }
            Values::Float(_) => None,
        }
    }

    pub fn total_f64(&self) -> f64 {
        match &self.values {
            Values::Rational(_) => self.total_rational().and_then(|m| m.to_f64()).unwrap_or(0.0),
            Values::Float(law) => {
                let mut keys: Vec<&u128> = law.map.keys().collect();
                keys.sort();
                keys.into_iter().map(|k| law.map[k]).sum::<f64>() + law.escaped
            }
        }
    }

    /// Same dimension, radius, step count and exactly the same masses
    /// (rational grids), regardless of how the fractions are represented.
    pub fn same_law(&self, other: &DistributionGrid) -> bool {
        if self.dim != other.dim || self.radius != other.radius || self.steps != other.steps {
            return false;
        }
        match (&self.values, &other.values) {
            (Values::Rational(a), Values::Rational(b)) => {
                if a.map.len() != b.map.len() {
                    return false;
                }
                let cross = |x: &BigUint, y: &BigUint| x * &b.denom == y * &a.denom;
                cross(&a.escaped, &b.escaped) && a.map.iter().all(|(k, x)| b.map.get(k).is_some_and(|y| cross(x, y)))
            }
            _ => false,
        }
    }

    /// Largest absolute mass difference over the union of supports.
    pub fn max_abs_diff(&self, other: &DistributionGrid) -> f64 {
        let mut pts = self.support();
        pts.extend(other.support());
        pts.sort();
        pts.dedup();
        pts.iter()
            .map(|p| (self.mass_f64(p) - other.mass_f64(p)).abs())
            .fold((self.truncation_f64() - other.truncation_f64()).abs(), f64::max)
    }

    /// Text form: a header block followed by one `point` row per support
    /// point in sorted order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{GRID_HEADER}");
        let _ = writeln!(out, "dimension {}", self.dim);
        let _ = writeln!(out, "steps {}", self.steps);
        let _ = writeln!(out, "radius {}", self.radius);
        let _ = writeln!(out, "mode {}", self.mode());
        let fmt_point = |p: &[i64]| p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        match &self.values {
            Values::Rational(_) => {
                let _ = writeln!(out, "truncation {}", self.truncation_rational().expect("rational"));
                for p in self.support() {
                    let _ = writeln!(
                        out,
                        "point {} {}",
                        fmt_point(&p),
                        self.mass_rational(&p).expect("rational")
                    );
                }
            }
            Values::Float(law) => {
                let _ = writeln!(out, "truncation {:?}", law.escaped);
                for p in self.support() {
                    let _ = writeln!(out, "point {} {:?}", fmt_point(&p), self.mass_f64(&p));
                }
            }
        }
        out
    }
}

fn parse_ratio(s: &str) -> Option<BigRational> {
    match s.split_once('/') {
        Some((n, d)) => {
            let d: BigInt = d.parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(BigRational::new(n.parse().ok()?, d))
        }
        None => Some(BigRational::from_integer(s.parse().ok()?)),
    }
}

/// Reads the format written by [`DistributionGrid::to_text`].
pub fn parse_grid(text: &str) -> Result<DistributionGrid, WalkError> {
    let err = |line: usize, message: String| WalkError::Parse { line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, l)) if l == GRID_HEADER => {}
        Some((n, l)) => return Err(err(n, format!("expected `{GRID_HEADER}`, found `{l}`"))),
        None => return Err(err(1, "empty input".into())),
    }
    let mut header = |key: &str| -> Result<(usize, String), WalkError> {
        let (n, l) = lines.next().ok_or_else(|| err(0, format!("missing `{key}`")))?;
        let rest = l
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| err(n, format!("expected `{key}`")))?;
        Ok((n, rest.trim().to_string()))
    };
    let num = |(n, s): (usize, String)| s.parse::<u64>().map_err(|_| err(n, format!("bad number `{s}`")));
    let dim = num(header("dimension")?)? as usize;
    let steps = num(header("steps")?)?;
    let radius = num(header("radius")?)?;
    let (mn, mode) = header("mode")?;
    let mode: ArithmeticMode = mode.parse().map_err(|e| err(mn, e))?;
    let (tn, trunc) = header("truncation")?;
    if dim == 0 || dim > MAX_DIM || radius > MAX_COORD {
        return Err(err(2, "dimension or radius out of range".into()));
    }

    let mut rows: Vec<(Vec<i64>, String, usize)> = Vec::new();
    for (n, l) in lines {
        let mut parts = l.split_whitespace();
        if parts.next() != Some("point") {
            return Err(err(n, "expected `point`".into()));
        }
        let (Some(coords), Some(mass), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(n, "expected `point COORDS MASS`".into()));
        };
        let p: Vec<i64> = coords
            .split(',')
            .map(|c| c.parse::<i64>())
            .collect::<Result<_, _>>()
            .map_err(|_| err(n, format!("bad coordinates `{coords}`")))?;
        if p.len() != dim {
            return Err(err(n, format!("point has {} coordinates, expected {dim}", p.len())));
        }
        if p.iter().map(|c| c.unsigned_abs()).sum::<u64>() > radius {
            return Err(err(n, "point outside the ball".into()));
        }
        rows.push((p, mass.to_string(), n));
    }

    match mode {
        ArithmeticMode::Rational => {
            let trunc = parse_ratio(&trunc).ok_or_else(|| err(tn, format!("bad mass `{trunc}`")))?;
            let mut masses = Vec::new();
            for (p, m, n) in rows {
                let m = parse_ratio(&m).ok_or_else(|| err(n, format!("bad mass `{m}`")))?;
                masses.push((p, m));
            }
            let denom = masses
                .iter()
                .map(|(_, m)| m.denom().clone())
                .fold(trunc.denom().clone(), |a, d| num_integer::Integer::lcm(&a, &d));
            let to_count = |m: &BigRational| (m.numer() * (&denom / m.denom())).to_biguint();
            let escaped = to_count(&trunc).ok_or_else(|| err(tn, "negative mass".into()))?;
            let mut map = FxHashMap::default();
            for (p, m) in &masses {
                let c = to_count(m).ok_or_else(|| err(0, "negative mass".into()))?;
                if !c.is_zero() {
                    map.insert(pack(p), c);
                }
            }
            Ok(DistributionGrid::from_law_rational(
                dim,
                radius,
                steps,
                Law {
                    map,
                    denom: denom.to_biguint().expect("positive"),
                    escaped,
                },
            ))
        }
        ArithmeticMode::Float => {
            let escaped: f64 = trunc.parse().map_err(|_| err(tn, format!("bad mass `{trunc}`")))?;
            let mut map = FxHashMap::default();
            for (p, m, n) in rows {
                let v: f64 = m.parse().map_err(|_| err(n, format!("bad mass `{m}`")))?;
                if v != 0.0 {
                    map.insert(pack(&p), v);
                }
            }
            Ok(DistributionGrid::from_law_float(
                dim,
                radius,
                steps,
                Law {
                    map,
                    denom: 1.0,
                    escaped,
                },
            ))
        }
    }
}

// After step t, mass further than `radius + (n - t)·reach` from the origin
// can no longer return to the ball, so it is retired as escaped. Masses
// inside the ball are therefore exact, not just lower bounds.
fn envelope(radius: u64, reach: u64, n: u64, t: u64) -> u64 {
    radius.saturating_add((n - t).saturating_mul(reach))
}

fn widest_envelope(radius: u64, reach: u64, n: u64) -> u64 {
    (0..=n)
        .map(|t| envelope(radius, reach, n, t).min(t.saturating_mul(reach)))
        .max()
        .unwrap_or(0)
        .max(radius.min(n.saturating_mul(reach)))
}

pub(crate) fn exact_law(w: &WalkSpec, n: u64, radius: u64) -> Law<BigUint> {
    let (moves, d) = exact_moves(w);
    let mut law = Law::point_mass(w.dim());
    for t in 1..=n {
        law = law.step(&moves, &d, w.dim(), envelope(radius, w.reach(), n, t));
    }
    law
}

pub(crate) fn float_law(w: &WalkSpec, n: u64, radius: u64) -> Law<f64> {
    let moves = float_moves(w);
    let mut law = Law::point_mass(w.dim());
    for t in 1..=n {
        law = law.step(&moves, &1.0, w.dim(), envelope(radius, w.reach(), n, t));
    }
    law
}

/// Iterator-style access to successive laws `Y_0, Y_1, ...` of a walk.
pub(crate) enum Stepper {
    Rational {
        moves: Vec<(u128, BigUint, u64)>,
        d: BigUint,
        law: Law<BigUint>,
    },
    Float {
        moves: Vec<(u128, f64, u64)>,
        law: Law<f64>,
    },
}

impl Stepper {
    pub fn new(w: &WalkSpec, mode: ArithmeticMode) -> Self {
        match mode {
            ArithmeticMode::Rational => {
                let (moves, d) = exact_moves(w);
                Stepper::Rational {
                    moves,
                    d,
                    law: Law::point_mass(w.dim()),
                }
            }
            ArithmeticMode::Float => Stepper::Float {
                moves: float_moves(w),
                law: Law::point_mass(w.dim()),
            },
        }
    }

    pub fn advance(&mut self, dim: usize, radius: u64) {
        match self {
            Stepper::Rational { moves, d, law } => *law = law.step(moves, d, dim, radius),
            Stepper::Float { moves, law } => *law = law.step(moves, &1.0, dim, radius),
        }
    }
}

/// Exact (or double-precision) law of `Y_n` on the ball of radius `radius`.
pub fn dp_step_distribution(
    w: &WalkSpec,
    n: u64,
    radius: u64,
    mode: ArithmeticMode,
) -> Result<DistributionGrid, WalkError> {
    check_feasible(w.dim(), radius)?;
    check_feasible(w.dim(), widest_envelope(radius, w.reach(), n))?;
    Ok(match mode {
        ArithmeticMode::Rational => DistributionGrid::from_law_rational(w.dim(), radius, n, exact_law(w, n, radius)),
        ArithmeticMode::Float => DistributionGrid::from_law_float(w.dim(), radius, n, float_law(w, n, radius)),
    })
}

fn binomial_row(n: u64) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for k in 0..n {
        let next = &row[k as usize] * BigUint::from(n - k) / BigUint::from(k + 1);
        row.push(next);
    }
    row
}

/// Law of the mixture walk from the double sum
/// `P(Z_n = z) = Σ_i C(n,i) p^i q^(n-i) Σ_{x+y=z} P(X_i = x) P(Y_(n-i) = y)`,
/// with `X` and `Y` the component walks run separately.
pub fn mixture_distribution(
    m: &MixtureSpec,
    n: u64,
    radius: u64,
    mode: ArithmeticMode,
) -> Result<DistributionGrid, WalkError> {
    let dim = m.component_a.dim();
    check_feasible(dim, radius)?;
    let full_a = n * m.component_a.reach();
    let full_b = n * m.component_b.reach();
    check_feasible(dim, full_a.max(full_b))?;
    let in_ball = |k: u128| key_l1(k, dim) <= radius;

    match mode {
        ArithmeticMode::Rational => {
            let (ma, da) = exact_moves(&m.component_a);
            let (mb, db) = exact_moves(&m.component_b);
            let p = m.prob_a();
            let pd = p.denom().to_biguint().expect("positive");
            let pn = p.numer().to_biguint().expect("positive");
            let qn = &pd - &pn;
            let mut laws_a = vec![Law::<BigUint>::point_mass(dim)];
            let mut laws_b = vec![Law::<BigUint>::point_mass(dim)];
            for _ in 0..n {
                let a = laws_a.last().expect("non-empty").step(&ma, &da, dim, full_a);
                laws_a.push(a);
                let b = laws_b.last().expect("non-empty").step(&mb, &db, dim, full_b);
                laws_b.push(b);
            }
            // Everything over pd^n · da^n · db^n.
            let binom = binomial_row(n);
            let mut map: FxHashMap<u128, BigUint> = FxHashMap::default();
            for i in 0..=n {
                let j = n - i;
                let coef =
                    &binom[i as usize] * pn.pow(i as u32) * qn.pow(j as u32) * da.pow(j as u32) * db.pow(i as u32);
                if Zero::is_zero(&coef) {
                    continue;
                }
                let (la, lb) = (&laws_a[i as usize], &laws_b[j as usize]);
                for (ka, ca) in &la.map {
                    let ca = ca * &coef;
                    for (kb, cb) in &lb.map {
                        // Both keys carry the offset once; remove one copy.
                        let z = ka.wrapping_add(*kb).wrapping_sub(pack(&vec![0; dim]));
                        if in_ball(z) {
                            map.entry(z).or_insert_with(<BigUint as Zero>::zero).add_mul(&ca, cb);
                        }
                    }
                }
            }
            map.retain(|_, v| !Zero::is_zero(v));
            let denom = pd.pow(n as u32) * da.pow(n as u32) * db.pow(n as u32);
            let stored: BigUint = map.values().sum();
            let escaped = &denom - stored;
            Ok(DistributionGrid::from_law_rational(
                dim,
                radius,
                n,
                Law { map, denom, escaped },
            ))
        }
        ArithmeticMode::Float => {
            let p = m.prob_a().to_f64().expect("finite");
            let q = 1.0 - p;
            let mut laws_a = vec![Law::<f64>::point_mass(dim)];
            let mut laws_b = vec![Law::<f64>::point_mass(dim)];
            let (ma, mb) = (float_moves(&m.component_a), float_moves(&m.component_b));
            for _ in 0..n {
                let a = laws_a.last().expect("non-empty").step(&ma, &1.0, dim, full_a);
                laws_a.push(a);
                let b = laws_b.last().expect("non-empty").step(&mb, &1.0, dim, full_b);
                laws_b.push(b);
            }
            let binom = binomial_row(n);
            let mut map: FxHashMap<u128, f64> = FxHashMap::default();
            let zero = pack(&vec![0; dim]);
            for i in 0..=n {
                let j = n - i;
                let coef = binom[i as usize].to_f64().expect("finite") * p.powi(i as i32) * q.powi(j as i32);
                if coef == 0.0 {
                    continue;
                }
                let mut ka_sorted: Vec<_> = laws_a[i as usize].map.iter().collect();
                ka_sorted.sort_by_key(|(k, _)| **k);
                let mut kb_sorted: Vec<_> = laws_b[j as usize].map.iter().collect();
                kb_sorted.sort_by_key(|(k, _)| **k);
                for (ka, ca) in &ka_sorted {
                    for (kb, cb) in &kb_sorted {
                        let z = ka.wrapping_add(**kb).wrapping_sub(zero);
                        if in_ball(z) {
                            *map.entry(z).or_insert(0.0) += coef * **ca * **cb;
                        }
                    }
                }
            }
            let mut keys: Vec<&u128> = map.keys().collect();
            keys.sort();
            let stored: f64 = keys.into_iter().map(|k| map[k]).sum();
            Ok(DistributionGrid::from_law_float(
                dim,
                radius,
                n,
                Law {
                    map,
                    denom: 1.0,
                    escaped: (1.0 - stored).max(0.0),
                },
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walks::spec::WalkSpec;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Independent oracle: enumerate every path of length `n`.
    fn enumerate_paths(w: &WalkSpec, n: u32) -> std::collections::BTreeMap<Vec<i64>, BigRational> {
        let mut out = std::collections::BTreeMap::new();
        let k = w.steps().len();
        for code in 0..k.pow(n) {
            let mut c = code;
            let mut pos = vec![0i64; w.dim()];
            let mut p = BigRational::one();
            for _ in 0..n {
                let (v, wt) = &w.steps()[c % k];
                c /= k;
                for (a, b) in pos.iter_mut().zip(v) {
                    *a += b;
                }
                p *= wt;
            }
            *out.entry(pos).or_insert_with(BigRational::zero) += p;
        }
        out
    }

    #[test]
    fn zero_steps_is_a_point_mass() {
        let g = dp_step_distribution(&WalkSpec::simple(3), 0, 5, ArithmeticMode::Rational).unwrap();
        assert_eq!(g.mass_rational(&[0, 0, 0]), Some(BigRational::one()));
        assert_eq!(g.truncation_rational(), Some(BigRational::zero()));
    }

    #[test]
    fn line_two_steps() {
        let g = dp_step_distribution(&WalkSpec::simple(1), 2, 2, ArithmeticMode::Rational).unwrap();
        assert_eq!(g.mass_rational(&[0]), Some(r(1, 2)));
        assert_eq!(g.mass_rational(&[2]), Some(r(1, 4)));
        assert_eq!(g.mass_rational(&[-2]), Some(r(1, 4)));
        assert_eq!(g.support(), vec![vec![-2], vec![0], vec![2]]);
    }

    #[test]
    fn z3_four_steps_matches_enumeration() {
        let w = WalkSpec::simple(3);
        let g = dp_step_distribution(&w, 4, 4, ArithmeticMode::Rational).unwrap();
        assert_eq!(g.mass_rational(&[0, 0, 0]), Some(r(5, 72)));
        let paths = enumerate_paths(&w, 4);
        for (p, m) in &paths {
            assert_eq!(g.mass_rational(p).as_ref(), Some(m), "at {p:?}");
        }
        assert_eq!(g.support().len(), paths.len());
    }

    #[test]
    fn truncation_collects_escaped_mass() {
        let w = WalkSpec::simple(1);
        let g = dp_step_distribution(&w, 3, 1, ArithmeticMode::Rational).unwrap();
        // P(|Y_3| = 3) = 1/4 escapes the radius-1 ball.
        assert_eq!(g.truncation_rational(), Some(r(1, 4)));
        assert_eq!(g.mass_rational(&[1]), Some(r(3, 8)));
        assert_eq!(g.total_rational(), Some(BigRational::one()));
        // Paths that leave the ball and come back still count.
        let g4 = dp_step_distribution(&w, 4, 1, ArithmeticMode::Rational).unwrap();
        assert_eq!(g4.mass_rational(&[0]), Some(r(3, 8)));
        assert_eq!(g4.truncation_rational(), Some(r(5, 8)));
        assert_eq!(g4.total_rational(), Some(BigRational::one()));
    }

    #[test]
    fn float_mode_tracks_rational() {
        let w = WalkSpec::simple(2);
        let a = dp_step_distribution(&w, 10, 6, ArithmeticMode::Rational).unwrap();
        let b = dp_step_distribution(&w, 10, 6, ArithmeticMode::Float).unwrap();
        assert_eq!(b.mode(), ArithmeticMode::Float);
        assert!(a.max_abs_diff(&b) < 1e-14);
        assert!((b.total_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_ball_is_a_resource_error() {
        let w = WalkSpec::simple(8);
        assert!(matches!(
            dp_step_distribution(&w, 1, 1000, ArithmeticMode::Float),
            Err(WalkError::Resource(_))
        ));
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(ball_size(2, 2), 13);
        assert_eq!(ball_size(3, 1), 7);
        assert_eq!(ball_size(1, 5), 11);
        assert_eq!(ball_size(3, 0), 1);
    }

    #[test]
    fn mixture_one_step_and_degenerate() {
        let a = WalkSpec::simple(2);
        let b = WalkSpec::lazy(2);
        let m = MixtureSpec::new(a.clone(), b.clone(), r(1, 3)).unwrap();
        let g = mixture_distribution(&m, 1, 1, ArithmeticMode::Rational).unwrap();
        assert_eq!(g.mass_rational(&[0, 0]), Some(r(2, 3)));
        assert_eq!(g.mass_rational(&[1, 0]), Some(r(1, 12)));

        let pure = MixtureSpec::new(a.clone(), b, BigRational::one()).unwrap();
        let g = mixture_distribution(&pure, 5, 5, ArithmeticMode::Rational).unwrap();
        let d = dp_step_distribution(&a, 5, 5, ArithmeticMode::Rational).unwrap();
        assert!(g.same_law(&d));
    }

    #[test]
    fn mixture_with_truncation_matches_mixed_dp() {
        let a = WalkSpec::simple(2);
        let b = WalkSpec::new(2, vec![(vec![1, 1], r(1, 2)), (vec![-1, -1], r(1, 2))]).unwrap();
        let m = MixtureSpec::new(a, b, r(2, 5)).unwrap();
        for n in 0..=6 {
            let g = mixture_distribution(&m, n, 3, ArithmeticMode::Rational).unwrap();
            let d = dp_step_distribution(&m.one_step(), n, 3, ArithmeticMode::Rational).unwrap();
            assert!(g.same_law(&d), "n = {n}");
            assert_eq!(g.total_rational(), Some(BigRational::one()));
        }
    }

    #[test]
    fn text_round_trip() {
        let w = WalkSpec::simple(2);
        for mode in [ArithmeticMode::Rational, ArithmeticMode::Float] {
            let g = dp_step_distribution(&w, 5, 3, mode).unwrap();
            let text = g.to_text();
            let back = parse_grid(&text).unwrap();
            assert_eq!(back.to_text(), text);
            if mode == ArithmeticMode::Rational {
                assert!(back.same_law(&g));
            }
        }
    }

    #[test]
    fn parse_errors_have_lines() {
        let bad =
            "mazebot-grid 1\ndimension 1\nsteps 1\nradius 1\nmode rational\ntruncation 0\npoint 1 1/2\npoint 5 1/2\n";
        assert!(matches!(parse_grid(bad), Err(WalkError::Parse { line: 8, .. })));
        assert!(matches!(parse_grid("nope"), Err(WalkError::Parse { line: 1, .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn simple_walk_laws_are_normalized_parity_correct_and_symmetric(dim in 1usize..=3, n in 0u64..=7) {
            let g = dp_step_distribution(&WalkSpec::simple(dim), n, n, ArithmeticMode::Rational).unwrap();
            prop_assert_eq!(g.total_rational(), Some(BigRational::one()));
            prop_assert_eq!(g.truncation_rational(), Some(BigRational::zero()));
            for p in g.support() {
                let l1: u64 = p.iter().map(|c| c.unsigned_abs()).sum();
                prop_assert_eq!(l1 % 2, n % 2);
                let mut canon: Vec<i64> = p.iter().map(|c| c.abs()).collect();
                canon.sort();
                prop_assert_eq!(g.mass_rational(&p), g.mass_rational(&canon));
                let mut rev = p.clone();
                rev.reverse();
                prop_assert_eq!(g.mass_rational(&p), g.mass_rational(&rev));
            }
        }

        #[test]
        fn mixture_double_sum_equals_mixed_dp(pn in 1i64..8, n in 0u64..=6) {
            let a = WalkSpec::simple(2);
            let b = WalkSpec::new(2, vec![(vec![0, 0], r(1, 2)), (vec![1, -1], r(1, 4)), (vec![-1, 1], r(1, 4))]).unwrap();
            let m = MixtureSpec::new(a, b, r(pn, 8)).unwrap();
            let radius = n;
            let g = mixture_distribution(&m, n, radius, ArithmeticMode::Rational).unwrap();
            let d = dp_step_distribution(&m.one_step(), n, radius, ArithmeticMode::Rational).unwrap();
            prop_assert!(g.same_law(&d));
        }
    }
}
