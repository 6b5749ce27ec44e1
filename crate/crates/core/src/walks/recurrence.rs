use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::grid::{check_feasible, Law, Stepper};
use super::spec::{ArithmeticMode, WalkSpec};
use super::{negate_key, pack, WalkError};

/// A sequence of probabilities indexed from 0, exact or double.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbSeries {
    Rational(Vec<BigRational>),
    Float(Vec<f64>),
}

impl ProbSeries {
    pub fn len(&self) -> usize {
        match self {
            ProbSeries::Rational(v) => v.len(),
            ProbSeries::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn f64_at(&self, i: usize) -> f64 {
        match self {
            ProbSeries::Rational(v) => v[i].to_f64().unwrap_or(0.0),
            ProbSeries::Float(v) => v[i],
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.f64_at(i)).collect()
    }

    pub fn rational(&self) -> Option<&[BigRational]> {
        match self {
            ProbSeries::Rational(v) => Some(v),
            ProbSeries::Float(_) => None,
        }
    }
}

fn pair_sum<S: Clone>(a: &Law<S>, b: &Law<S>, dim: usize, mut add: impl FnMut(&S, &S)) {
    let (small, large, swap) = if a.map.len() <= b.map.len() {
        (a, b, false)
    } else {
        (b, a, true)
    };
    let mut keys: Vec<&u128> = small.map.keys().collect();
    keys.sort();
    for k in keys {
        if let Some(y) = large.map.get(&negate_key(*k, dim)) {
            let x = &small.map[k];
            if swap {
                add(y, x)
            } else {
                add(x, y)
            }
        }
    }
}

/// `P(Y_n = 0)` for `n = 0..=horizon`, from
/// `P(Y_(a+b) = 0) = Σ_x P(Y_a = x) P(Y_b = -x)` with `a, b` about `n/2`, so
/// only laws up to half the horizon are ever built.
pub fn origin_return_series(w: &WalkSpec, horizon: u64, mode: ArithmeticMode) -> Result<ProbSeries, WalkError> {
    let dim = w.dim();
    let half = horizon.div_ceil(2);
    let radius = half * w.reach();
    check_feasible(dim, radius)?;
    let mut stepper = Stepper::new(w, mode);
    match &mut stepper {
        Stepper::Rational { law, .. } => {
            let mut out = vec![BigRational::one()];
            let mut prev = law.clone();
            for m in 1..=half {
                stepper.advance(dim, radius);
                let Stepper::Rational { law: cur, .. } = &stepper else {
                    unreachable!()
                };
                let mut odd = BigUint::zero();
                pair_sum(&prev, cur, dim, |x, y| odd += x * y);
                out.push(BigRational::new(odd.into(), (&prev.denom * &cur.denom).into()));
                if 2 * m <= horizon {
                    let mut even = BigUint::zero();
                    pair_sum(cur, cur, dim, |x, y| even += x * y);
                    out.push(BigRational::new(even.into(), (&cur.denom * &cur.denom).into()));
                }
                prev = cur.clone();
            }
            out.truncate(horizon as usize + 1);
            Ok(ProbSeries::Rational(out))
        }
        Stepper::Float { law, .. } => {
            let mut out = vec![1.0];
            let mut prev = law.clone();
            for m in 1..=half {
                stepper.advance(dim, radius);
                let Stepper::Float { law: cur, .. } = &stepper else {
                    unreachable!()
                };
                let mut odd = 0.0;
                pair_sum(&prev, cur, dim, |x, y| odd += x * y);
                out.push(odd);
                if 2 * m <= horizon {
                    let mut even = 0.0;
                    pair_sum(cur, cur, dim, |x, y| even += x * y);
                    out.push(even);
                }
                prev = cur.clone();
            }
            out.truncate(horizon as usize + 1);
            Ok(ProbSeries::Float(out))
        }
    }
}

/// `F_n = P(first return to the origin at a time in 1..=n)` for
/// `n = 0..=budget`, by running the walk with the origin made absorbing.
pub fn first_return_cdf(w: &WalkSpec, budget: u64, mode: ArithmeticMode) -> Result<ProbSeries, WalkError> {
    let dim = w.dim();
    let reach = w.reach();
    check_feasible(dim, (budget / 2).saturating_mul(reach))?;
    let origin = pack(&vec![0; dim]);
    let mut stepper = Stepper::new(w, mode);
    match &mut stepper {
        Stepper::Rational { .. } => {
            let mut out = vec![BigRational::zero()];
            for t in 1..=budget {
                // Points further than the remaining steps can cover are dropped.
                stepper.advance(dim, (budget - t).saturating_mul(reach));
                let Stepper::Rational { law, .. } = &mut stepper else {
                    unreachable!()
                };
                let hit = law.map.remove(&origin).unwrap_or_default();
                let f = BigRational::new(hit.into(), law.denom.clone().into());
                let last = out.last().expect("non-empty").clone();
                out.push(last + f);
            }
            Ok(ProbSeries::Rational(out))
        }
        Stepper::Float { .. } => {
            let mut out = vec![0.0];
            for t in 1..=budget {
                stepper.advance(dim, (budget - t).saturating_mul(reach));
                let Stepper::Float { law, .. } = &mut stepper else {
                    unreachable!()
                };
                let hit = law.map.remove(&origin).unwrap_or(0.0);
                let last = *out.last().expect("non-empty");
                out.push(last + hit);
            }
            Ok(ProbSeries::Float(out))
        }
    }
}

/// `1 - 1/S(N)` with `S(N) = Σ_{n=0..=N} P(Y_n = 0)`, a lower bound on the
/// probability of returning to the origin within `N` steps.
pub fn return_lower_bound(series: &ProbSeries) -> f64 {
    match series {
        ProbSeries::Rational(v) => {
            let s: BigRational = v.iter().sum();
            (BigRational::one() - s.recip()).to_f64().unwrap_or(0.0)
        }
        ProbSeries::Float(v) => 1.0 - 1.0 / v.iter().sum::<f64>(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    RecurrentEvidence,
    TransientEvidence,
    Degenerate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::RecurrentEvidence => "recurrent_evidence",
            Verdict::TransientEvidence => "transient_evidence",
            Verdict::Degenerate => "degenerate",
        })
    }
}

/// Finite-horizon evidence about recurrence; not a proof.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceReport {
    pub verdict: Verdict,
    pub horizon: u64,
    pub mode: ArithmeticMode,
    /// `S(N)` as an exact fraction in rational mode.
    pub partial_sum: Option<String>,
    pub partial_sum_f64: f64,
    /// Fitted exponent in `P(Y_2m = 0) ~ m^(-alpha)`.
    pub alpha: Option<f64>,
    pub fit_points: usize,
    pub unstable_fit: bool,
    pub support_rank: usize,
    pub note: &'static str,
}

pub const MIN_FIT_POINTS: usize = 5;

/// Least squares of `ln y` against `ln x`; returns the negated slope.
fn decay_exponent(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

/// Sums the origin-return series up to `horizon` and fits the decay of
/// `P(Y_2m = 0)` over `m` in `[horizon/4, horizon/2]`. An exponent at most 1
/// means the series looks divergent.
pub fn classify_recurrence(w: &WalkSpec, horizon: u64, mode: ArithmeticMode) -> Result<RecurrenceReport, WalkError> {
    if horizon < 10 {
        return Err(WalkError::Invalid(format!("horizon {horizon} is below 10")));
    }
    let series = origin_return_series(w, horizon, mode)?;
    let values = series.to_f64();
    let (partial_sum, partial_sum_f64) = match &series {
        ProbSeries::Rational(v) => {
            let s: BigRational = v.iter().sum();
            let f = s.to_f64().unwrap_or(f64::INFINITY);
            (Some(s.to_string()), f)
        }
        ProbSeries::Float(v) => (None, v.iter().sum()),
    };
    let points: Vec<(f64, f64)> = (horizon.div_ceil(4)..=horizon / 2)
        .filter(|&m| m >= 1 && values[2 * m as usize] > 0.0)
        .map(|m| (m as f64, values[2 * m as usize]))
        .collect();
    let alpha = decay_exponent(&points);
    let rank = w.support_rank();
    let verdict = if rank < w.dim() {
        Verdict::Degenerate
    } else {
        match alpha {
            Some(a) if a <= 1.0 => Verdict::RecurrentEvidence,
            _ => Verdict::TransientEvidence,
        }
    };
    Ok(RecurrenceReport {
        verdict,
        horizon,
        mode,
        partial_sum,
        partial_sum_f64,
        alpha,
        fit_points: points.len(),
        unstable_fit: points.len() < MIN_FIT_POINTS,
        support_rank: rank,
        note: "heuristic evidence from a finite horizon, not a proof",
    })
}
