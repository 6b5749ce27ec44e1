//! Plain-text automaton description files.
//!
//! ```text
//! # comment
//! mazebot-automaton 1
//! dimension 2
//! pebbles 1
//! initial start
//! state start move 0
//!   on * -> choose 1/2 left, 1/2 right
//! state left move -e1 carry 1
//!   on 1** -> start
//!   on *** -> left
//! state right move +e1 terminal
//! ```
//!
//! A record is `state` (or `gadget`, for compiler-generated states) followed
//! by the name, `move <±eI|0>`, an optional `carry <n bits>` (pebble 1
//! first) and an optional `terminal` marker. Rules use patterns over the
//! observation bits (pebbles, flag, random bit; `*` = either) and either
//! name a successor or a `choose` list of exact probabilities. The first
//! matching rule applies.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::lattice::MoveVector;

use super::model::{Move, StateRole};
use super::rational::{Action, Branch, ObsPattern, RationalAutomaton, RationalState, Rule};
use super::AutomatonError;

pub const FORMAT_HEADER: &str = "mazebot-automaton";
pub const FORMAT_VERSION: u32 = 1;

fn perr(line: usize, column: usize, message: impl Into<String>) -> AutomatonError {
    AutomatonError::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Whitespace tokens with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() || c == ',' {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
            if c == ',' {
                out.push((i + 1, ","));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn parse_prob(text: &str) -> Option<BigRational> {
    let (n, d) = match text.split_once('/') {
        Some((n, d)) => (n.parse::<BigInt>().ok()?, d.parse::<BigInt>().ok()?),
        None => (text.parse::<BigInt>().ok()?, BigInt::from(1)),
    };
    if d == BigInt::from(0) {
        return None;
    }
    Some(BigRational::new(n, d))
}

enum PendingAction {
    Goto(usize, String),
    Choose(Vec<(usize, BigRational, String)>),
}

struct PendingState {
    line: usize,
    name: String,
    mv: Move,
    role: StateRole,
    terminal: bool,
    rules: Vec<(usize, ObsPattern, PendingAction)>,
}

/// Parses an automaton description. Errors carry 1-based line and column.
pub fn parse_automaton(text: &str) -> Result<RationalAutomaton, AutomatonError> {
    let mut header_seen = false;
    let mut dim: Option<usize> = None;
    let mut pebbles: Option<usize> = None;
    let mut initial: Option<(usize, usize, String)> = None;
    let mut states: Vec<PendingState> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let ln = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks = tokens(content);
        let Some(&(col, head)) = toks.first() else {
            continue;
        };
        if !header_seen {
            if head != FORMAT_HEADER {
                return Err(perr(
                    ln,
                    col,
                    format!("expected `{FORMAT_HEADER} {FORMAT_VERSION}` header"),
                ));
            }
            match toks.get(1) {
                Some((_, v)) if *v == FORMAT_VERSION.to_string() => {}
                Some((c, v)) => return Err(perr(ln, *c, format!("unsupported format version `{v}`"))),
                None => return Err(perr(ln, col + head.len(), "missing format version")),
            }
            header_seen = true;
            continue;
        }
        let arg = |i: usize| -> Result<(usize, &str), AutomatonError> {
            toks.get(i)
                .copied()
                .ok_or_else(|| perr(ln, content.trim_end().len() + 1, format!("`{head}` needs an argument")))
        };
        match head {
            "dimension" | "pebbles" => {
                let (c, v) = arg(1)?;
                let v: usize = v.parse().map_err(|_| perr(ln, c, format!("bad integer `{v}`")))?;
                if !states.is_empty() {
                    return Err(perr(ln, col, format!("`{head}` must precede the states")));
                }
                if head == "dimension" {
                    if v == 0 {
                        return Err(perr(ln, c, "dimension must be at least 1"));
                    }
                    dim = Some(v);
                } else {
                    if v > super::model::MAX_PEBBLES {
                        return Err(perr(ln, c, format!("at most {} pebbles", super::model::MAX_PEBBLES)));
                    }
                    pebbles = Some(v);
                }
            }
            "initial" => {
                let (c, v) = arg(1)?;
                initial = Some((ln, c, v.to_string()));
            }
            "state" | "gadget" => {
                let n = pebbles.ok_or_else(|| perr(ln, col, "`pebbles` must be declared before states"))?;
                if dim.is_none() {
                    return Err(perr(ln, col, "`dimension` must be declared before states"));
                }
                let (_, name) = arg(1)?;
                let mut st = PendingState {
                    line: ln,
                    name: name.to_string(),
                    mv: Move::STAY,
                    role: if head == "gadget" {
                        StateRole::Gadget
                    } else {
                        StateRole::Program
                    },
                    terminal: false,
                    rules: Vec::new(),
                };
                let mut saw_move = false;
                let mut i = 2;
                while i < toks.len() {
                    let (c, key) = toks[i];
                    match key {
                        "move" => {
                            let (vc, v) = arg(i + 1)?;
                            st.mv.dir = v.parse::<MoveVector>().map_err(|e| perr(ln, vc, e.to_string()))?;
                            if st.mv.dir.min_dim() > dim.unwrap_or(0) {
                                return Err(perr(ln, vc, format!("move `{v}` leaves Z^{}", dim.unwrap_or(0))));
                            }
                            saw_move = true;
                            i += 2;
                        }
                        "carry" => {
                            let (vc, v) = arg(i + 1)?;
                            if v.len() != n || !v.chars().all(|ch| ch == '0' || ch == '1') {
                                return Err(perr(ln, vc, format!("carry mask must be {n} bits")));
                            }
                            st.mv.carry = v
                                .chars()
                                .enumerate()
                                .filter(|(_, ch)| *ch == '1')
                                .fold(0, |m, (j, _)| m | 1 << j);
                            i += 2;
                        }
                        "terminal" => {
                            st.terminal = true;
                            i += 1;
                        }
                        other => return Err(perr(ln, c, format!("unexpected `{other}`"))),
                    }
                }
                if !saw_move {
                    return Err(perr(ln, col, format!("state `{name}` has no move")));
                }
                states.push(st);
            }
            "on" => {
                let n = pebbles.unwrap_or(0);
                let st = states
                    .last_mut()
                    .ok_or_else(|| perr(ln, col, "rule outside of a state record"))?;
                if st.terminal {
                    return Err(perr(ln, col, format!("terminal state `{}` cannot have rules", st.name)));
                }
                let (pc, ptxt) = arg(1)?;
                let pattern = ObsPattern::parse(ptxt, n).map_err(|e| perr(ln, pc, e))?;
                let (ac, arrow) = arg(2)?;
                if arrow != "->" {
                    return Err(perr(ln, ac, "expected `->`"));
                }
                let (tc, target) = arg(3)?;
                let action = if target == "choose" {
                    let mut branches = Vec::new();
                    let mut i = 4;
                    loop {
                        let (qc, qtxt) = arg(i)?;
                        let prob = parse_prob(qtxt).ok_or_else(|| perr(ln, qc, format!("bad probability `{qtxt}`")))?;
                        let (nc, name) = arg(i + 1)?;
                        branches.push((nc, prob, name.to_string()));
                        match toks.get(i + 2) {
                            None => break,
                            Some((_, ",")) => i += 3,
                            Some((c, other)) => return Err(perr(ln, *c, format!("expected `,`, found `{other}`"))),
                        }
                    }
                    PendingAction::Choose(branches)
                } else {
                    if let Some((c, extra)) = toks.get(4) {
                        return Err(perr(ln, *c, format!("unexpected `{extra}`")));
                    }
                    PendingAction::Goto(tc, target.to_string())
                };
                st.rules.push((ln, pattern, action));
            }
            other => return Err(perr(ln, col, format!("unknown directive `{other}`"))),
        }
    }

    let last = text.lines().count().max(1);
    if !header_seen {
        return Err(perr(1, 1, format!("missing `{FORMAT_HEADER}` header")));
    }
    let dim = dim.ok_or_else(|| perr(last, 1, "missing `dimension`"))?;
    let pebbles = pebbles.ok_or_else(|| perr(last, 1, "missing `pebbles`"))?;
    let mut ids: HashMap<String, usize> = HashMap::new();
    for (i, s) in states.iter().enumerate() {
        if ids.insert(s.name.clone(), i).is_some() {
            return Err(perr(s.line, 1, format!("duplicate state `{}`", s.name)));
        }
    }
    let (iln, icol, iname) = initial.ok_or_else(|| perr(last, 1, "missing `initial`"))?;
    let initial = *ids
        .get(&iname)
        .ok_or_else(|| perr(iln, icol, format!("unknown state `{iname}`")))?;
    let resolve = |ln: usize, col: usize, name: &str| {
        ids.get(name)
            .copied()
            .ok_or_else(|| perr(ln, col, format!("unknown state `{name}`")))
    };

    let mut out = Vec::with_capacity(states.len());
    for s in states {
        if !s.terminal && s.rules.is_empty() {
            return Err(perr(
                s.line,
                1,
                format!("state `{}` has no rules and is not marked terminal", s.name),
            ));
        }
        let mut rules = Vec::with_capacity(s.rules.len());
        for (ln, pattern, action) in s.rules {
            let action = match action {
                PendingAction::Goto(c, t) => Action::Goto(resolve(ln, c, &t)?),
                PendingAction::Choose(bs) => Action::Choose(
                    bs.into_iter()
                        .map(|(c, prob, t)| {
                            Ok(Branch {
                                prob,
                                target: resolve(ln, c, &t)?,
                            })
                        })
                        .collect::<Result<_, AutomatonError>>()?,
                ),
            };
            rules.push(Rule { pattern, action });
        }
        out.push(RationalState {
            name: s.name,
            mv: s.mv,
            role: s.role,
            rules,
        });
    }
    let ra = RationalAutomaton {
        dim,
        pebbles,
        states: out,
        initial,
    };
    ra.validate()?;
    Ok(ra)
}

/// Writes an automaton in the text format. `parse_automaton` inverts it.
pub fn write_automaton(ra: &RationalAutomaton) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{FORMAT_HEADER} {FORMAT_VERSION}");
    let _ = writeln!(s, "dimension {}", ra.dim);
    let _ = writeln!(s, "pebbles {}", ra.pebbles);
    let _ = writeln!(s, "initial {}", ra.states[ra.initial].name);
    for st in &ra.states {
        let kind = match st.role {
            StateRole::Program => "state",
            StateRole::Gadget => "gadget",
        };
        let _ = write!(s, "{kind} {} move {}", st.name, st.mv.dir);
        if ra.pebbles > 0 {
            let mask: String = (0..ra.pebbles)
                .map(|i| if st.mv.carry >> i & 1 == 1 { '1' } else { '0' })
                .collect();
            let _ = write!(s, " carry {mask}");
        }
        if st.is_terminal() {
            s.push_str(" terminal");
        }
        s.push('\n');
        for r in &st.rules {
            let _ = write!(s, "  on {} -> ", r.pattern);
            match &r.action {
                Action::Goto(t) => s.push_str(&ra.states[*t].name),
                Action::Choose(bs) => {
                    s.push_str("choose ");
                    for (i, b) in bs.iter().enumerate() {
                        if i > 0 {
                            s.push_str(", ");
                        }
                        let _ = write!(s, "{} {}", b.prob, ra.states[b.target].name);
                    }
                }
            }
            s.push('\n');
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = "\
# coin with a biased branch
mazebot-automaton 1
dimension 2
pebbles 1
initial start
state start move 0
  on 1** -> choose 1/3 left, 2/3 right
  on *** -> start
state left move -e1 carry 1 terminal
state right move +e2 carry 0 terminal
";

    #[test]
    fn parses_demo() {
        let ra = parse_automaton(DEMO).unwrap();
        assert_eq!(ra.dim, 2);
        assert_eq!(ra.pebbles, 1);
        assert_eq!(ra.states.len(), 3);
        assert_eq!(ra.states[1].mv.carry, 1);
        assert!(ra.states[2].is_terminal());
        match &ra.states[0].rules[0].action {
            Action::Choose(b) => assert_eq!(b[1].prob, BigRational::new(2.into(), 3.into())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn write_then_parse_is_identity() {
        let ra = parse_automaton(DEMO).unwrap();
        let text = write_automaton(&ra);
        assert_eq!(parse_automaton(&text).unwrap(), ra);
        assert_eq!(write_automaton(&parse_automaton(&text).unwrap()), text);
    }

    fn err_at(text: &str) -> (usize, usize) {
        match parse_automaton(text) {
            Err(AutomatonError::Parse { line, column, .. }) => (line, column),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_positions() {
        let bad_move = DEMO.replace("move -e1", "move -q1");
        assert_eq!(err_at(&bad_move), (9, 17));
        let bad_prob = DEMO.replace("1/3 left", "1/0 left");
        assert_eq!(err_at(&bad_prob), (7, 20));
        let bad_target = DEMO.replace("2/3 right", "2/3 rite");
        assert_eq!(err_at(&bad_target), (7, 34));
        assert_eq!(err_at("automaton 1\n"), (1, 1));
        let no_rules = DEMO.replace("carry 0 terminal", "carry 0");
        assert_eq!(err_at(&no_rules).0, 10);
    }

    #[test]
    fn semantic_errors_surface() {
        let bad_sum = DEMO.replace("2/3 right", "1/3 right");
        assert!(matches!(
            parse_automaton(&bad_sum),
            Err(AutomatonError::Distribution { .. })
        ));
    }
}
