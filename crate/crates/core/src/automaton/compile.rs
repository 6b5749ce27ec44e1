//! Lowering of rational-probability automata to coin-flip automata.
//!
//! Every random choice `(p'_1/q, …, p'_k/q)` becomes a balanced binary tree
//! of depth `D` driven by the random bit. Its `2^D` leaves are split into
//! contiguous runs: `p'_i` leaves commit to branch `i`, the rest restart the
//! tree. Tree states move `+e1` on odd levels and `-e1` on even levels and
//! `D` is even, so coin flipping causes no net displacement. Restart leaves
//! go through one extra `+e1`/`-e1` pair before re-entering level 1.
//!
//! Depth: `D = 2q`, or, for `q = 2^m`, the smallest even `D >= max(m, 2)`
//! with leaves scaled by `2^(D-m)` and no restart leaves at all.
//!
//! Subtrees whose leaves all share one outcome are behaviorally identical,
//! so they are merged into one chain per (level, outcome). The tree keeps
//! its timing but needs only `O(D·k)` states, which makes large common
//! denominators practical.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::lattice::{LatticePoint, MoveVector};

use super::model::{Move, RobotAutomaton, StateId, StateRole, StateSpec};
use super::rational::{Action, Branch, RationalAutomaton};
use super::AutomatonError;

/// Largest common denominator accepted for a non-dyadic choice (tree depth
/// is twice this).
pub const MAX_DENOMINATOR: u64 = 4096;

/// Cancel-pair axis used inside gadgets.
const CANCEL_AXIS: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceGadget {
    pub id: usize,
    /// Merged branches ordered by target.
    pub branches: Vec<Branch>,
    pub denominator: BigUint,
    pub depth: usize,
    pub leaves_per_branch: Vec<BigUint>,
    pub restart_leaves: BigUint,
    /// Level-1 states entered on random bit 0 and 1.
    pub first_level: [StateId; 2],
    /// Every compiler-generated state of this gadget.
    pub states: Vec<StateId>,
    /// Restart pair, absent when the choice is dyadic.
    pub restart: Option<[StateId; 2]>,
    /// `(state, non-random observation bits)` pairs that enter the gadget.
    pub sources: Vec<(StateId, u32)>,
}

impl ChoiceGadget {
    pub fn leaf_count(&self) -> BigUint {
        BigUint::one() << self.depth
    }

    /// Probability that one pass through the tree commits to some branch.
    pub fn round_success(&self) -> BigRational {
        let committed: BigUint = self.leaves_per_branch.iter().sum();
        BigRational::new(committed.into(), self.leaf_count().into())
    }
}

#[derive(Debug, Clone)]
pub struct CompiledAutomaton {
    pub automaton: RobotAutomaton,
    pub gadgets: Vec<ChoiceGadget>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum NodeKey {
    Pure { depth: usize, outcome: usize },
    Mixed { depth: usize, prefix: BigUint },
}

struct Layout {
    depth: usize,
    /// Cumulative leaf boundaries; outcome `k` (restart) ends at `2^depth`.
    bounds: Vec<BigUint>,
}

impl Layout {
    fn classify(&self, depth: usize, prefix: &BigUint) -> NodeKey {
        let span = self.depth - depth;
        let lo = prefix << span;
        let hi = &lo + (BigUint::one() << span);
        // Outcome o covers [bounds[o], bounds[o+1]).
        let outcome = self.bounds.partition_point(|b| b <= &lo) - 1;
        if hi <= self.bounds[outcome + 1] {
            NodeKey::Pure { depth, outcome }
        } else {
            NodeKey::Mixed {
                depth,
                prefix: prefix.clone(),
            }
        }
    }
}

fn tree_move(level: usize) -> Move {
    if level % 2 == 1 {
        Move::walk(MoveVector::Plus(CANCEL_AXIS))
    } else {
        Move::walk(MoveVector::Minus(CANCEL_AXIS))
    }
}

/// Merges duplicate targets and orders branches by target.
fn normalize(branches: &[Branch]) -> Vec<Branch> {
    let mut merged: BTreeMap<StateId, BigRational> = BTreeMap::new();
    for b in branches {
        *merged.entry(b.target).or_insert_with(BigRational::zero) += &b.prob;
    }
    merged
        .into_iter()
        .map(|(target, prob)| Branch { prob, target })
        .collect()
}

struct Emitter {
    pebbles: usize,
    states: Vec<StateSpec>,
    rows: Vec<Vec<StateId>>,
}

impl Emitter {
    fn width(&self) -> usize {
        1 << (self.pebbles + 2)
    }

    fn push(&mut self, name: String, mv: Move) -> StateId {
        self.states.push(StateSpec {
            name,
            mv,
            role: StateRole::Gadget,
        });
        self.rows.push(Vec::new());
        self.states.len() - 1
    }

    fn constant_row(&self, t: StateId) -> Vec<StateId> {
        vec![t; self.width()]
    }

    fn coin_row(&self, on0: StateId, on1: StateId) -> Vec<StateId> {
        let rbit = 1usize << (self.pebbles + 1);
        (0..self.width())
            .map(|w| if w & rbit == 0 { on0 } else { on1 })
            .collect()
    }

    fn build_gadget(&mut self, id: usize, branches: Vec<Branch>) -> Result<ChoiceGadget, AutomatonError> {
        let denominator = branches
            .iter()
            .fold(num_bigint::BigInt::one(), |acc, b| acc.lcm(b.prob.denom()));
        let denominator = denominator.to_biguint().expect("positive denominator");
        let numerators: Vec<BigUint> = branches
            .iter()
            .map(|b| {
                (b.prob.numer() * (num_bigint::BigInt::from(denominator.clone()) / b.prob.denom()))
                    .to_biguint()
                    .expect("positive numerator")
            })
            .collect();

        let (depth, leaves_per_branch) = if denominator.count_ones() == 1 {
            let m = denominator.trailing_zeros().unwrap_or(0) as usize;
            let depth = (m + m % 2).max(2);
            let scale = BigUint::one() << (depth - m);
            (depth, numerators.iter().map(|p| p * &scale).collect::<Vec<_>>())
        } else {
            let q = denominator
                .to_u64()
                .filter(|&q| q <= MAX_DENOMINATOR)
                .ok_or_else(|| AutomatonError::DenominatorTooLarge(denominator.to_string()))?;
            (2 * q as usize, numerators)
        };
        let leaf_count = BigUint::one() << depth;
        let committed: BigUint = leaves_per_branch.iter().sum();
        let restart_leaves = &leaf_count - &committed;

        let mut bounds = vec![BigUint::zero()];
        for c in &leaves_per_branch {
            let last = bounds.last().expect("non-empty").clone();
            bounds.push(last + c);
        }
        bounds.push(leaf_count);
        let layout = Layout { depth, bounds };
        let k = branches.len();

        let mut ids: HashMap<NodeKey, StateId> = HashMap::new();
        let mut queue = VecDeque::new();
        let mut gadget_states = Vec::new();
        let mut intern = |em: &mut Emitter, key: NodeKey, queue: &mut VecDeque<(NodeKey, StateId)>| -> StateId {
            if let Some(&s) = ids.get(&key) {
                return s;
            }
            let (name, level) = match &key {
                NodeKey::Pure { depth: d, outcome } if *outcome == k => (format!("~g{id}.d{d}.r"), *d),
                NodeKey::Pure { depth: d, outcome } => (format!("~g{id}.d{d}.b{outcome}"), *d),
                NodeKey::Mixed { depth: d, prefix } => (format!("~g{id}.d{d}.x{prefix}"), *d),
            };
            let s = em.push(name, tree_move(level));
            ids.insert(key.clone(), s);
            queue.push_back((key, s));
            s
        };

        let first_level = [
            intern(self, layout.classify(1, &BigUint::zero()), &mut queue),
            intern(self, layout.classify(1, &BigUint::one()), &mut queue),
        ];
        let restart = if restart_leaves.is_zero() {
            None
        } else {
            let r1 = self.push(format!("~g{id}.r1"), Move::walk(MoveVector::Plus(CANCEL_AXIS)));
            let r2 = self.push(format!("~g{id}.r2"), Move::walk(MoveVector::Minus(CANCEL_AXIS)));
            self.rows[r1] = self.constant_row(r2);
            self.rows[r2] = self.coin_row(first_level[0], first_level[1]);
            Some([r1, r2])
        };

        while let Some((key, s)) = queue.pop_front() {
            gadget_states.push(s);
            let row = match key {
                NodeKey::Pure { depth: d, outcome } if d == depth => {
                    if outcome == k {
                        self.constant_row(restart.expect("restart leaves exist")[0])
                    } else {
                        self.constant_row(branches[outcome].target)
                    }
                }
                NodeKey::Pure { depth: d, outcome } => {
                    let child = intern(self, NodeKey::Pure { depth: d + 1, outcome }, &mut queue);
                    self.constant_row(child)
                }
                NodeKey::Mixed { depth: d, prefix } => {
                    let left = &prefix << 1usize;
                    let right = &left + 1u32;
                    let c0 = intern(self, layout.classify(d + 1, &left), &mut queue);
                    let c1 = intern(self, layout.classify(d + 1, &right), &mut queue);
                    self.coin_row(c0, c1)
                }
            };
            self.rows[s] = row;
        }
        if let Some(r) = restart {
            gadget_states.extend(r);
        }
        gadget_states.sort_unstable();

        Ok(ChoiceGadget {
            id,
            branches,
            denominator,
            depth,
            leaves_per_branch,
            restart_leaves,
            first_level,
            states: gadget_states,
            restart,
            sources: Vec::new(),
        })
    }
}

/// Compiles a rational automaton into an equivalent coin-flip automaton.
///
/// Original states keep their ids; gadget states are appended. Identical
/// distributions share one gadget.
pub fn compile_rational(ra: &RationalAutomaton) -> Result<CompiledAutomaton, AutomatonError> {
    ra.validate()?;
    let n = ra.pebbles;
    let width = 1usize << (n + 2);
    let rbit = 1u32 << (n + 1);
    let mut em = Emitter {
        pebbles: n,
        states: ra
            .states
            .iter()
            .map(|s| StateSpec {
                name: s.name.clone(),
                mv: s.mv,
                role: s.role,
            })
            .collect(),
        rows: vec![Vec::new(); ra.states.len()],
    };
    let mut gadgets: Vec<ChoiceGadget> = Vec::new();
    let mut by_dist: HashMap<Vec<(StateId, BigRational)>, usize> = HashMap::new();

    for (q, st) in ra.states.iter().enumerate() {
        if st.is_terminal() {
            em.rows[q] = vec![q; width];
            continue;
        }
        let mut row = vec![usize::MAX; width];
        for w in 0..width as u32 {
            let action = ra.action_for(q, w).expect("validated rules are total");
            row[w as usize] = match action {
                Action::Goto(t) => *t,
                Action::Choose(branches) => {
                    let norm = normalize(branches);
                    if norm.len() == 1 {
                        norm[0].target
                    } else {
                        let key: Vec<_> = norm.iter().map(|b| (b.target, b.prob.clone())).collect();
                        let g = match by_dist.get(&key) {
                            Some(&g) => g,
                            None => {
                                let g = gadgets.len();
                                gadgets.push(em.build_gadget(g, norm)?);
                                by_dist.insert(key, g);
                                g
                            }
                        };
                        let env = w & !rbit;
                        if !gadgets[g].sources.contains(&(q, env)) {
                            gadgets[g].sources.push((q, env));
                        }
                        gadgets[g].first_level[usize::from(w & rbit != 0)]
                    }
                }
            };
        }
        em.rows[q] = row;
    }

    let mut seen = std::collections::HashSet::new();
    for s in &em.states {
        if !seen.insert(s.name.as_str()) {
            return Err(AutomatonError::Invalid(format!(
                "state name `{}` collides with a generated gadget state",
                s.name
            )));
        }
    }
    let next = em.rows.into_iter().flatten().collect();
    let automaton = RobotAutomaton::new(ra.dim, n, em.states, ra.initial, next)?;
    Ok(CompiledAutomaton { automaton, gadgets })
}

/// Checks that the summed displacement of gadget states is the same along
/// every path from level 1 and is zero whenever the gadget is left (commit)
/// or re-entered (restart). Returns the number of gadget states checked.
pub fn check_zero_displacement(a: &RobotAutomaton, g: &ChoiceGadget) -> Result<usize, String> {
    let inside: std::collections::HashSet<StateId> = g.states.iter().copied().collect();
    let dim = a.dim();
    let mut disp: HashMap<StateId, LatticePoint> = HashMap::new();
    let mut queue = VecDeque::new();
    for &s in &g.first_level {
        let d = LatticePoint::origin(dim).shifted(a.state(s).mv.dir);
        if let Some(prev) = disp.insert(s, d.clone()) {
            if prev != d {
                return Err(format!("state `{}` reached with two displacements", a.state(s).name));
            }
        }
        queue.push_back(s);
    }
    while let Some(s) = queue.pop_front() {
        let here = disp[&s].clone();
        let mut succ: Vec<StateId> = a.row(s).to_vec();
        succ.sort_unstable();
        succ.dedup();
        for t in succ {
            if !inside.contains(&t) {
                if !here.is_origin() {
                    return Err(format!(
                        "leaving the gadget from `{}` with displacement {here}",
                        a.state(s).name
                    ));
                }
                continue;
            }
            // Re-entering level 1 from the restart pair starts a fresh pass.
            let base = if g.first_level.contains(&t) && g.restart.is_some_and(|r| r[1] == s) {
                if !here.is_origin() {
                    return Err(format!("restart with displacement {here}"));
                }
                LatticePoint::origin(dim)
            } else {
                here.clone()
            };
            let d = base.shifted(a.state(t).mv.dir);
            match disp.get(&t) {
                Some(prev) if *prev != d => {
                    return Err(format!("state `{}` reached with two displacements", a.state(t).name));
                }
                Some(_) => {}
                None => {
                    disp.insert(t, d);
                    queue.push_back(t);
                }
            }
        }
    }
    Ok(disp.len())
}
