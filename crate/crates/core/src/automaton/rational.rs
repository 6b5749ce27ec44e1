//! Automata whose transitions are finite distributions with exact rational
//! probabilities. These are the authoring format; [`super::compile_rational`]
//! lowers them to coin-flip automata.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed};

use super::model::{Move, RobotAutomaton, StateId, StateRole, MAX_PEBBLES};
use super::AutomatonError;

/// Pattern over the `n+2` observation bits; `None` matches either value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObsPattern(Vec<Option<bool>>);

impl ObsPattern {
    pub fn any(pebbles: usize) -> Self {
        ObsPattern(vec![None; pebbles + 2])
    }

    pub fn new(bits: Vec<Option<bool>>) -> Self {
        ObsPattern(bits)
    }

    /// Parses `1*0`-style text; a lone `*` is shorthand for all wildcards.
    pub fn parse(text: &str, pebbles: usize) -> Result<Self, String> {
        if text == "*" {
            return Ok(ObsPattern::any(pebbles));
        }
        if text.chars().count() != pebbles + 2 {
            return Err(format!("pattern `{text}` must have {} symbols", pebbles + 2));
        }
        text.chars()
            .map(|c| match c {
                '0' => Ok(Some(false)),
                '1' => Ok(Some(true)),
                '*' => Ok(None),
                _ => Err(format!("bad pattern symbol `{c}`")),
            })
            .collect::<Result<_, _>>()
            .map(ObsPattern)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[Option<bool>] {
        &self.0
    }

    pub fn matches(&self, obs_bits: u32) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(i, b)| b.is_none_or(|v| (obs_bits >> i & 1 == 1) == v))
    }

    pub fn random_bit_free(&self) -> bool {
        self.0.last().is_some_and(|b| b.is_none())
    }
}

impl fmt::Display for ObsPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(Option::is_none) {
            return write!(f, "*");
        }
        for b in &self.0 {
            let c = match b {
                None => '*',
                Some(true) => '1',
                Some(false) => '0',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub prob: BigRational,
    pub target: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Goto(StateId),
    Choose(Vec<Branch>),
}

/// `on <pattern> -> <action>`; the first matching rule wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub pattern: ObsPattern,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalState {
    pub name: String,
    pub mv: Move,
    pub role: StateRole,
    /// Empty for terminal states, which loop on themselves forever.
    pub rules: Vec<Rule>,
}

impl RationalState {
    pub fn is_terminal(&self) -> bool {
        self.rules.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalAutomaton {
    pub dim: usize,
    pub pebbles: usize,
    pub states: Vec<RationalState>,
    pub initial: StateId,
}

impl RationalAutomaton {
    pub fn find(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s.name == name)
    }

    /// Checks well-formedness: names unique, rules total over all
    /// observations, distributions positive and summing exactly to one.
    pub fn validate(&self) -> Result<(), AutomatonError> {
        if self.dim == 0 {
            return Err(AutomatonError::Invalid("dimension must be at least 1".into()));
        }
        if self.pebbles > MAX_PEBBLES {
            return Err(AutomatonError::TooManyPebbles(self.pebbles));
        }
        if self.initial >= self.states.len() {
            return Err(AutomatonError::Invalid("initial state out of range".into()));
        }
        let mut names = BTreeMap::new();
        for (i, s) in self.states.iter().enumerate() {
            if names.insert(s.name.as_str(), i).is_some() {
                return Err(AutomatonError::Invalid(format!("duplicate state `{}`", s.name)));
            }
            if s.mv.dir.min_dim() > self.dim || s.mv.carry >> self.pebbles != 0 {
                return Err(AutomatonError::Invalid(format!(
                    "state `{}` has an invalid move",
                    s.name
                )));
            }
            for rule in &s.rules {
                if rule.pattern.len() != self.pebbles + 2 {
                    return Err(AutomatonError::Invalid(format!(
                        "state `{}`: pattern `{}` has the wrong length",
                        s.name, rule.pattern
                    )));
                }
                match &rule.action {
                    Action::Goto(t) => self.check_target(&s.name, *t)?,
                    Action::Choose(branches) => {
                        if !rule.pattern.random_bit_free() {
                            return Err(AutomatonError::Invalid(format!(
                                "state `{}`: a random choice cannot also constrain the random bit",
                                s.name
                            )));
                        }
                        validate_distribution(&s.name, branches)?;
                        for b in branches {
                            self.check_target(&s.name, b.target)?;
                        }
                    }
                }
            }
            if !s.is_terminal() {
                if let Some(w) =
                    (0..1u32 << (self.pebbles + 2)).find(|&w| !s.rules.iter().any(|r| r.pattern.matches(w)))
                {
                    return Err(AutomatonError::Invalid(format!(
                        "state `{}` has no rule for observation {}",
                        s.name,
                        super::Observation::new(self.pebbles, w)
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_target(&self, from: &str, t: StateId) -> Result<(), AutomatonError> {
        if t < self.states.len() {
            Ok(())
        } else {
            Err(AutomatonError::Invalid(format!(
                "state `{from}` targets unknown state #{t}"
            )))
        }
    }

    /// First matching rule for a packed observation.
    pub fn action_for(&self, q: StateId, obs_bits: u32) -> Option<&Action> {
        self.states[q]
            .rules
            .iter()
            .find(|r| r.pattern.matches(obs_bits))
            .map(|r| &r.action)
    }
}

fn validate_distribution(state: &str, branches: &[Branch]) -> Result<(), AutomatonError> {
    if branches.is_empty() {
        return Err(AutomatonError::Distribution {
            state: state.to_string(),
            reason: "no branches".into(),
        });
    }
    if let Some(b) = branches.iter().find(|b| !b.prob.is_positive()) {
        return Err(AutomatonError::Distribution {
            state: state.to_string(),
            reason: format!("non-positive probability {}", b.prob),
        });
    }
    let total: BigRational = branches.iter().map(|b| &b.prob).sum();
    if !total.is_one() {
        return Err(AutomatonError::Distribution {
            state: state.to_string(),
            reason: format!("probabilities sum to {total}, not 1"),
        });
    }
    Ok(())
}

impl RobotAutomaton {
    /// Lossless view as a rational automaton with deterministic rules.
    /// When both random-bit values lead to the same state a single rule with
    /// a wildcard random bit is emitted.
    pub fn to_rational(&self) -> RationalAutomaton {
        let n = self.pebbles();
        let rbit = 1u32 << (n + 1);
        let states = (0..self.len())
            .map(|q| {
                let spec = self.state(q);
                let row = self.row(q);
                let mut rules = Vec::new();
                for env in 0..rbit {
                    let (t0, t1) = (row[env as usize], row[(env | rbit) as usize]);
                    let mut bits: Vec<Option<bool>> = (0..=n).map(|i| Some(env >> i & 1 == 1)).collect();
                    if t0 == t1 {
                        bits.push(None);
                        rules.push(Rule {
                            pattern: ObsPattern::new(bits),
                            action: Action::Goto(t0),
                        });
                    } else {
                        for (b, t) in [(false, t0), (true, t1)] {
                            let mut p = bits.clone();
                            p.push(Some(b));
                            rules.push(Rule {
                                pattern: ObsPattern::new(p),
                                action: Action::Goto(t),
                            });
                        }
                    }
                }
                // Collapse to one wildcard rule when the whole row is constant.
                if row.iter().all(|&t| t == row[0]) {
                    rules = vec![Rule {
                        pattern: ObsPattern::any(n),
                        action: Action::Goto(row[0]),
                    }];
                }
                RationalState {
                    name: spec.name.clone(),
                    mv: spec.mv,
                    role: spec.role,
                    rules,
                }
            })
            .collect();
        RationalAutomaton {
            dim: self.dim(),
            pebbles: n,
            states,
            initial: self.initial(),
        }
    }
}

/// Convenience builder used by the traversal programs and tests.
#[derive(Debug, Clone)]
pub struct RationalBuilder {
    dim: usize,
    pebbles: usize,
    states: Vec<RationalState>,
}

impl RationalBuilder {
    pub fn new(dim: usize, pebbles: usize) -> Self {
        RationalBuilder {
            dim,
            pebbles,
            states: Vec::new(),
        }
    }

    /// Declares a state; rules are attached later so that targets can be
    /// declared in any order.
    pub fn state(&mut self, name: impl Into<String>, mv: Move) -> StateId {
        self.states.push(RationalState {
            name: name.into(),
            mv,
            role: StateRole::Program,
            rules: Vec::new(),
        });
        self.states.len() - 1
    }

    pub fn on(&mut self, q: StateId, pattern: &str, action: Action) -> &mut Self {
        let pattern = ObsPattern::parse(pattern, self.pebbles).expect("valid pattern literal");
        self.states[q].rules.push(Rule { pattern, action });
        self
    }

    pub fn build(self, initial: StateId) -> Result<RationalAutomaton, AutomatonError> {
        let ra = RationalAutomaton {
            dim: self.dim,
            pebbles: self.pebbles,
            states: self.states,
            initial,
        };
        ra.validate()?;
        Ok(ra)
    }
}

/// Uniform distribution over `targets`.
pub fn uniform(targets: &[StateId]) -> Action {
    let p = BigRational::new(1.into(), (targets.len() as i64).into());
    Action::Choose(
        targets
            .iter()
            .map(|&t| Branch {
                prob: p.clone(),
                target: t,
            })
            .collect(),
    )
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(num.into(), den.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::MoveVector;

    #[test]
    fn pattern_text() {
        let p = ObsPattern::parse("1*0", 1).unwrap();
        assert!(p.matches(0b001));
        assert!(p.matches(0b011));
        assert!(!p.matches(0b101));
        assert_eq!(p.to_string(), "1*0");
        assert_eq!(ObsPattern::parse("*", 3).unwrap().len(), 5);
        assert!(ObsPattern::parse("10", 1).is_err());
        assert!(ObsPattern::parse("1x0", 1).is_err());
    }

    #[test]
    fn distribution_must_sum_to_one() {
        let mut b = RationalBuilder::new(1, 0);
        let s = b.state("s", Move::STAY);
        let t = b.state("t", Move::walk(MoveVector::Plus(0)));
        b.on(
            s,
            "*",
            Action::Choose(vec![
                Branch {
                    prob: ratio(1, 3),
                    target: t,
                },
                Branch {
                    prob: ratio(1, 3),
                    target: s,
                },
            ]),
        );
        b.on(t, "*", Action::Goto(s));
        assert!(matches!(b.build(s), Err(AutomatonError::Distribution { .. })));
    }

    #[test]
    fn zero_probability_rejected() {
        let mut b = RationalBuilder::new(1, 0);
        let s = b.state("s", Move::STAY);
        b.on(
            s,
            "*",
            Action::Choose(vec![
                Branch {
                    prob: ratio(0, 1),
                    target: s,
                },
                Branch {
                    prob: ratio(1, 1),
                    target: s,
                },
            ]),
        );
        assert!(matches!(b.build(s), Err(AutomatonError::Distribution { .. })));
    }

    #[test]
    fn partial_rules_rejected() {
        let mut b = RationalBuilder::new(1, 1);
        let s = b.state("s", Move::STAY);
        b.on(s, "1**", Action::Goto(s));
        assert!(matches!(b.build(s), Err(AutomatonError::Invalid(_))));
    }

    #[test]
    fn choice_cannot_pin_random_bit() {
        let mut b = RationalBuilder::new(1, 0);
        let s = b.state("s", Move::STAY);
        b.on(s, "*1", uniform(&[s]));
        b.on(s, "*", Action::Goto(s));
        assert!(b.build(s).is_err());
    }

    #[test]
    fn terminal_states_need_no_rules() {
        let mut b = RationalBuilder::new(1, 0);
        let s = b.state("s", Move::STAY);
        let t = b.state("t", Move::STAY);
        b.on(s, "*", Action::Goto(t));
        let ra = b.build(s).unwrap();
        assert!(ra.states[t].is_terminal());
    }
}
