//! Exact first-passage probabilities of a coin-flip automaton into a set of
//! exit states, with the non-random observation bits held fixed.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::compile::{check_zero_displacement, ChoiceGadget};
use super::model::{RobotAutomaton, StateId};
use super::AutomatonError;

/// The sub-automaton entered at `entry` while the environment part of the
/// observation stays at `env` (pebble and flag bits; the random bit is
/// ignored).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceRegion {
    pub entry: StateId,
    pub env: u32,
    pub states: BTreeSet<StateId>,
}

fn successors(a: &RobotAutomaton, s: StateId, env: u32) -> [StateId; 2] {
    let rbit = 1usize << (a.pebbles() + 1);
    let row = a.row(s);
    let env = env as usize & !rbit;
    [row[env], row[env | rbit]]
}

#[derive(Debug, Clone, Default)]
struct Row {
    coef: BTreeMap<usize, BigRational>,
    rhs: Vec<BigRational>,
}

/// Probability of each exit being the first exit visited at a time `>= 1`
/// after starting in `region.entry`.
///
/// Every non-exit state reachable from the entry must lie in
/// `region.states`, and each of them must be able to reach an exit.
pub fn absorption_probabilities(
    a: &RobotAutomaton,
    region: &ChoiceRegion,
    exits: &BTreeSet<StateId>,
) -> Result<BTreeMap<StateId, BigRational>, AutomatonError> {
    let half = BigRational::new(1.into(), 2.into());
    let exit_index: BTreeMap<StateId, usize> = exits.iter().enumerate().map(|(i, &s)| (s, i)).collect();

    // Transient states in BFS order from the entry's successors.
    let mut local: BTreeMap<StateId, usize> = BTreeMap::new();
    let mut order: Vec<StateId> = Vec::new();
    let mut depth: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    for t in successors(a, region.entry, region.env) {
        if !exit_index.contains_key(&t) && !local.contains_key(&t) {
            local.insert(t, order.len());
            order.push(t);
            depth.push(1);
            queue.push_back(t);
        }
    }
    while let Some(s) = queue.pop_front() {
        if !region.states.contains(&s) {
            return Err(AutomatonError::Escapes(a.state(s).name.clone()));
        }
        let d = depth[local[&s]];
        for t in successors(a, s, region.env) {
            if !exit_index.contains_key(&t) && !local.contains_key(&t) {
                local.insert(t, order.len());
                order.push(t);
                depth.push(d + 1);
                queue.push_back(t);
            }
        }
    }

    // States that cannot reach any exit make the system singular.
    let m = order.len();
    let mut reaches = vec![false; m];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut frontier = VecDeque::new();
    for (i, &s) in order.iter().enumerate() {
        for t in successors(a, s, region.env) {
            if exit_index.contains_key(&t) {
                if !reaches[i] {
                    reaches[i] = true;
                    frontier.push_back(i);
                }
            } else {
                preds[local[&t]].push(i);
            }
        }
    }
    while let Some(i) = frontier.pop_front() {
        for &p in &preds[i] {
            if !reaches[p] {
                reaches[p] = true;
                frontier.push_back(p);
            }
        }
    }
    let trapped: Vec<String> = (0..m)
        .filter(|&i| !reaches[i])
        .map(|i| a.state(order[i]).name.clone())
        .collect();
    if !trapped.is_empty() {
        return Err(AutomatonError::Trapped(trapped));
    }

    // h_s = Σ_t P(s,t)·(e_t if t is an exit else h_t)
    let k = exits.len();
    let make_row = |s: StateId| {
        let mut row = Row {
            coef: BTreeMap::new(),
            rhs: vec![BigRational::zero(); k],
        };
        for t in successors(a, s, region.env) {
            match exit_index.get(&t) {
                Some(&e) => row.rhs[e] += &half,
                None => *row.coef.entry(local[&t]).or_insert_with(BigRational::zero) += &half,
            }
        }
        row
    };
    let mut rows: Vec<Row> = order.iter().map(|&s| make_row(s)).collect();
    let mut users: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    for (u, row) in rows.iter().enumerate() {
        for &v in row.coef.keys() {
            if v != u {
                users[v].insert(u);
            }
        }
    }

    // Deepest states first keeps fill-in small for tree-shaped regions.
    let mut elim: Vec<usize> = (0..m).collect();
    elim.sort_by_key(|&i| (std::cmp::Reverse(depth[i]), i));
    for &v in &elim {
        let mut row = std::mem::take(&mut rows[v]);
        if let Some(selfc) = row.coef.remove(&v) {
            let denom = BigRational::one() - selfc;
            if denom.is_zero() {
                return Err(AutomatonError::Trapped(vec![a.state(order[v]).name.clone()]));
            }
            let f = denom.recip();
            row.coef.values_mut().for_each(|c| *c *= &f);
            row.rhs.iter_mut().for_each(|c| *c *= &f);
        }
        for t in row.coef.keys() {
            users[*t].remove(&v);
        }
        let dependents = std::mem::take(&mut users[v]);
        for u in dependents {
            let c = rows[u].coef.remove(&v).expect("user index in sync");
            for (t, ct) in &row.coef {
                let entry = rows[u].coef.entry(*t).or_insert_with(BigRational::zero);
                *entry += &c * ct;
                if entry.is_zero() {
                    rows[u].coef.remove(t);
                    users[*t].remove(&u);
                } else if *t != u {
                    users[*t].insert(u);
                }
            }
            for (r, rv) in rows[u].rhs.iter_mut().zip(&row.rhs) {
                *r += &c * rv;
            }
        }
        rows[v] = row;
    }

    let mut value: Vec<Option<Vec<BigRational>>> = vec![None; m];
    for &v in elim.iter().rev() {
        let mut h = rows[v].rhs.clone();
        for (t, c) in &rows[v].coef {
            let ht = value[*t].as_ref().expect("later-eliminated values known");
            for (x, y) in h.iter_mut().zip(ht) {
                *x += c * y;
            }
        }
        value[v] = Some(h);
    }

    let mut result = vec![BigRational::zero(); k];
    for t in successors(a, region.entry, region.env) {
        match exit_index.get(&t) {
            Some(&e) => result[e] += &half,
            None => {
                for (r, v) in result.iter_mut().zip(value[local[&t]].as_ref().expect("solved")) {
                    *r += &half * v;
                }
            }
        }
    }
    Ok(exits.iter().copied().zip(result).collect())
}

/// Outcome of checking one compiled choice against its source distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GadgetVerification {
    pub gadget: usize,
    pub expected: BTreeMap<StateId, BigRational>,
    pub computed: BTreeMap<StateId, BigRational>,
    pub exact_match: bool,
    /// `Err` describes the first path with non-zero net displacement.
    pub displacement: Result<(), String>,
}

impl GadgetVerification {
    pub fn passed(&self) -> bool {
        self.exact_match && self.displacement.is_ok()
    }
}

/// Solves the absorption system of a gadget entered from its first source
/// and compares it with the distribution it was compiled from.
pub fn verify_gadget(a: &RobotAutomaton, g: &ChoiceGadget) -> Result<GadgetVerification, AutomatonError> {
    let &(entry, env) = g
        .sources
        .first()
        .ok_or_else(|| AutomatonError::Invalid(format!("gadget {} has no source", g.id)))?;
    let mut states: BTreeSet<StateId> = g.states.iter().copied().collect();
    states.insert(entry);
    let exits: BTreeSet<StateId> = g.branches.iter().map(|b| b.target).collect();
    let computed = absorption_probabilities(a, &ChoiceRegion { entry, env, states }, &exits)?;
    let expected: BTreeMap<StateId, BigRational> = g.branches.iter().map(|b| (b.target, b.prob.clone())).collect();
    Ok(GadgetVerification {
        gadget: g.id,
        exact_match: computed == expected,
        expected,
        computed,
        displacement: check_zero_displacement(a, g).map(|_| ()),
    })
}
