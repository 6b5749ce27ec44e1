use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::WalkError;

/// Ground-truth big rationals or fast doubles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ArithmeticMode {
    #[default]
    Rational,
    Float,
}

impl std::fmt::Display for ArithmeticMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ArithmeticMode::Rational => "rational",
            ArithmeticMode::Float => "float",
        })
    }
}

impl std::str::FromStr for ArithmeticMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rational" => Ok(ArithmeticMode::Rational),
            "float" => Ok(ArithmeticMode::Float),
            _ => Err(format!("unknown arithmetic mode `{s}`")),
        }
    }
}

/// A finite step law on `Z^dim` with exact rational weights summing to one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkSpec {
    dim: usize,
    steps: Vec<(Vec<i64>, BigRational)>,
}

impl WalkSpec {
    /// Merges repeated vectors; rejects non-positive weights and weights not
    /// summing to exactly one.
    pub fn new(dim: usize, steps: Vec<(Vec<i64>, BigRational)>) -> Result<Self, WalkError> {
        if dim == 0 {
            return Err(WalkError::Invalid("dimension must be at least 1".into()));
        }
        let mut merged: BTreeMap<Vec<i64>, BigRational> = BTreeMap::new();
        for (v, w) in steps {
            if v.len() != dim {
                return Err(WalkError::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if !w.is_positive() {
                return Err(WalkError::Invalid(format!("non-positive weight {w}")));
            }
            *merged.entry(v).or_insert_with(BigRational::zero) += w;
        }
        let total: BigRational = merged.values().sum();
        if !total.is_one() {
            return Err(WalkError::Invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(WalkSpec {
            dim,
            steps: merged.into_iter().collect(),
        })
    }

    /// `P(X = ±e_j) = 1/(2·dim)`.
    pub fn simple(dim: usize) -> Self {
        let w = BigRational::new(BigInt::one(), BigInt::from(2 * dim));
        let steps = (0..dim)
            .flat_map(|j| {
                [1i64, -1].map(|s| {
                    let mut v = vec![0; dim];
                    v[j] = s;
                    (v, w.clone())
                })
            })
            .collect();
        WalkSpec::new(dim, steps).expect("simple walk is valid")
    }

    /// Always stays put.
    pub fn lazy(dim: usize) -> Self {
        WalkSpec::new(dim, vec![(vec![0; dim], BigRational::one())]).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> &[(Vec<i64>, BigRational)] {
        &self.steps
    }

    pub fn weight_of(&self, v: &[i64]) -> BigRational {
        self.steps
            .iter()
            .find(|(s, _)| s.as_slice() == v)
            .map_or_else(BigRational::zero, |(_, w)| w.clone())
    }

    /// Largest L1 length of a step.
    pub fn reach(&self) -> u64 {
        self.steps
            .iter()
            .map(|(v, _)| v.iter().map(|c| c.unsigned_abs()).sum::<u64>())
            .max()
            .unwrap_or(0)
    }

    /// Weights over their least common denominator: `(numerators, D)`.
    pub fn integer_weights(&self) -> (Vec<BigInt>, BigInt) {
        let d = self.steps.iter().fold(BigInt::one(), |acc, (_, w)| acc.lcm(w.denom()));
        let nums = self.steps.iter().map(|(_, w)| w.numer() * (&d / w.denom())).collect();
        (nums, d)
    }

    /// Weights as `u64` numerators over a `u64` denominator, when they fit.
    pub fn small_weights(&self) -> Option<(Vec<u64>, u64)> {
        let (nums, d) = self.integer_weights();
        let nums = nums.iter().map(|n| n.to_u64()).collect::<Option<Vec<_>>>()?;
        Some((nums, d.to_u64()?))
    }

    pub fn float_weights(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|(_, w)| w.to_f64().expect("weights are finite"))
            .collect()
    }

    /// Rank of the step vectors over the rationals.
    pub fn support_rank(&self) -> usize {
        let rows: Vec<Vec<i64>> = self.steps.iter().map(|(v, _)| v.clone()).collect();
        crate::lattice::rank(&rows, self.dim)
    }

    /// One-step law `p·a + q·b`.
    pub fn mix(a: &WalkSpec, b: &WalkSpec, p: &BigRational) -> Result<WalkSpec, WalkError> {
        if a.dim != b.dim {
            return Err(WalkError::DimensionMismatch {
                expected: a.dim,
                found: b.dim,
            });
        }
        let q = BigRational::one() - p;
        let steps = a
            .steps
            .iter()
            .map(|(v, w)| (v.clone(), w * p))
            .chain(b.steps.iter().map(|(v, w)| (v.clone(), w * &q)))
            .filter(|(_, w)| w.is_positive())
            .collect();
        WalkSpec::new(a.dim, steps)
    }
}

/// Walk that takes a step of `component_a` with probability `prob_a` and of
/// `component_b` otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixtureSpec {
    pub component_a: WalkSpec,
    pub component_b: WalkSpec,
    prob_a: BigRational,
}

impl MixtureSpec {
    /// Requires `0 < p <= 1` (the degenerate `p = 1` is allowed so that a
    /// mixture can collapse onto one component).
    pub fn new(component_a: WalkSpec, component_b: WalkSpec, prob_a: BigRational) -> Result<Self, WalkError> {
        if component_a.dim() != component_b.dim() {
            return Err(WalkError::DimensionMismatch {
                expected: component_a.dim(),
                found: component_b.dim(),
            });
        }
        if !prob_a.is_positive() || prob_a > BigRational::one() {
            return Err(WalkError::Invalid(format!(
                "mixture probability {prob_a} outside (0, 1]"
            )));
        }
        Ok(MixtureSpec {
            component_a,
            component_b,
            prob_a,
        })
    }

    pub fn prob_a(&self) -> &BigRational {
        &self.prob_a
    }

    pub fn prob_b(&self) -> BigRational {
        BigRational::one() - &self.prob_a
    }

    pub fn one_step(&self) -> WalkSpec {
        WalkSpec::mix(&self.component_a, &self.component_b, &self.prob_a).expect("dimensions checked")
    }
}
