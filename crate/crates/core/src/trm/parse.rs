//! Line-oriented text format for machines.
//!
//! ```text
//! name: fig3
//! states: u0 u1
//! terminal: u2
//! initial: u0
//! clocks: x
//! props: p q
//! state_reward: u0 s0=-2 s1=-1 *=-1
//! state_reward: u1 -1
//! trans: u0 -> u1 | label=p | guard=x>2 | reward=5 | name=theta1
//! ```
//!
//! Label formulas use `!`, `&`, `|` and parentheses over declared
//! propositions; `any` matches every label set and `empty` (or `{}`) only the
//! empty one. Guards are `&`-separated atoms `x<=3`, `x>2`, `x=1`, or `true`.

use std::collections::BTreeMap;

use super::guard::{CmpOp, Guard, GuardAtom};
use super::label::{admissible_labels, LabelFormula, PropSet};
use super::machine::{StateId, StateReward, Trm, TrmBuilder};
use super::TrmError;

/// A parsed machine plus non-fatal findings.
#[derive(Clone, Debug)]
pub struct Parsed {
    pub trm: Trm,
    pub warnings: Vec<String>,
}

/// Parses and validates a machine, rejecting nondeterministic ones.
pub fn parse_trm(source: &str) -> Result<Trm, TrmError> {
    parse_trm_report(source).map(|p| p.trm)
}

/// Like [`parse_trm`] but also returns warnings (unreachable terminals).
pub fn parse_trm_report(source: &str) -> Result<Parsed, TrmError> {
    let mut b = TrmBuilder::new("");
    let mut pending: Vec<(usize, String)> = Vec::new();
    let mut rewards: Vec<(usize, String)> = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let (key, rest) = text.split_once(':').ok_or_else(|| syntax(line, "expected `key: value`"))?;
        let rest = rest.trim();
        match key.trim() {
            "name" => b.set_name(rest.to_string()),
            "description" => b.set_description(rest.to_string()),
            "states" | "terminal" => {
                let terminal = key.trim() == "terminal";
                for s in rest.split_whitespace() {
                    check_ident(line, s)?;
                    if !b.add_state(s.to_string(), terminal) {
                        return Err(syntax(line, &format!("state `{s}` declared twice")));
                    }
                }
            }
            "initial" => {
                check_ident(line, rest)?;
                b.set_initial(rest.to_string());
            }
            "clocks" => {
                for c in rest.split_whitespace() {
                    check_ident(line, c)?;
                    if !b.add_clock(c.to_string()) {
                        return Err(syntax(line, &format!("clock `{c}` declared twice")));
                    }
                }
            }
            "props" => {
                for p in rest.split_whitespace() {
                    check_ident(line, p)?;
                    if matches!(p, "any" | "empty" | "true") {
                        return Err(syntax(line, &format!("`{p}` is reserved")));
                    }
                    if !b.add_prop(p.to_string()) {
                        return Err(syntax(line, &format!("proposition `{p}` declared twice")));
                    }
                }
            }
            "exclusive" => pending.push((line, text.to_string())),
            "state_reward" => rewards.push((line, rest.to_string())),
            "trans" => pending.push((line, text.to_string())),
            other => return Err(syntax(line, &format!("unknown key `{other}`"))),
        }
    }

    for (line, rest) in rewards {
        let mut parts = rest.split_whitespace();
        let state = parts.next().ok_or_else(|| syntax(line, "missing state name"))?;
        if !b.has_state(state) {
            return Err(undeclared(line, "state", state));
        }
        let values: Vec<&str> = parts.collect();
        let reward = match values.as_slice() {
            [] => return Err(syntax(line, "missing reward value")),
            [single] if !single.contains('=') => StateReward::Constant(number(line, single)?),
            many => {
                let mut map = BTreeMap::new();
                let mut default = 0.0;
                for kv in many {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| syntax(line, &format!("expected `env_state=value`, found `{kv}`")))?;
                    let v = number(line, v)?;
                    if k == "*" {
                        default = v;
                    } else {
                        map.insert(k.to_string(), v);
                    }
                }
                StateReward::PerEnvState { values: map, default }
            }
        };
        b.set_state_reward(state.to_string(), reward);
    }

    for (line, text) in pending {
        let (key, rest) = text.split_once(':').unwrap();
        if key.trim() == "exclusive" {
            let mut group = PropSet::EMPTY;
            for p in rest.split_whitespace() {
                let id = b
                    .prop_names()
                    .iter()
                    .position(|n| n == p)
                    .ok_or_else(|| undeclared(line, "proposition", p))?;
                group.insert(id);
            }
            b.add_exclusive(group);
        } else {
            parse_transition(&mut b, line, rest.trim())?;
        }
    }

    let trm = b.build()?;
    if let Some(v) = trm.check_deterministic().first() {
        return Err(TrmError::Nondeterministic {
            state: trm.state_name(v.state).to_string(),
            first: trm.transition(v.first).name.clone(),
            second: trm.transition(v.second).name.clone(),
            witness: v.witness.render(trm.props()),
        });
    }
    let warnings = trm
        .unreachable_terminals()
        .into_iter()
        .map(|u| format!("terminal state `{}` is unreachable", trm.state_name(u)))
        .collect();
    Ok(Parsed { trm, warnings })
}

fn parse_transition(b: &mut TrmBuilder, line: usize, rest: &str) -> Result<(), TrmError> {
    // Fields are separated by `|`; segments that do not start with `key=`
    // belong to a disjunction inside the previous field.
    let mut fields: Vec<String> = Vec::new();
    for seg in rest.split('|') {
        let starts_field = seg
            .trim()
            .split_once('=')
            .is_some_and(|(k, _)| matches!(k.trim(), "label" | "guard" | "reset" | "reward" | "name"));
        match fields.last_mut() {
            Some(last) if !starts_field => {
                last.push('|');
                last.push_str(seg);
            }
            _ => fields.push(seg.to_string()),
        }
    }
    let head = fields.remove(0);
    let (src, dst) = head
        .split_once("->")
        .ok_or_else(|| syntax(line, "expected `source -> target`"))?;
    let (src, dst) = (src.trim(), dst.trim());
    for s in [src, dst] {
        if !b.has_state(s) {
            return Err(undeclared(line, "state", s));
        }
    }
    let mut label = None;
    let mut guard = Guard::top(b.clock_names().len());
    let mut resets = Vec::new();
    let mut reward = 0.0;
    let mut name = None;
    for f in &fields {
        let (k, v) = f.split_once('=').unwrap();
        let v = v.trim();
        match k.trim() {
            "label" => label = Some(parse_label(line, v, b.prop_names())?),
            "guard" => guard = parse_guard(line, v, b.clock_names())?,
            "reset" => {
                if v != "{}" && !v.is_empty() {
                    for c in v.split([',', ' ']).filter(|s| !s.is_empty()) {
                        let id = b
                            .clock_names()
                            .iter()
                            .position(|n| n == c)
                            .ok_or_else(|| undeclared(line, "clock", c))?;
                        if !resets.contains(&id) {
                            resets.push(id);
                        }
                    }
                    resets.sort_unstable();
                }
            }
            "reward" => reward = number(line, v)?,
            "name" => name = Some(v.to_string()),
            _ => unreachable!(),
        }
    }
    let label = label.ok_or_else(|| syntax(line, "transition needs a `label=` field"))?;
    let name = name.unwrap_or_else(|| format!("{src}->{dst}@{line}"));
    b.push_transition(name, src, label, guard, resets, dst, reward);
    Ok(())
}

fn syntax(line: usize, message: &str) -> TrmError {
    TrmError::Syntax {
        line,
        message: message.to_string(),
    }
}

fn undeclared(line: usize, kind: &'static str, name: &str) -> TrmError {
    TrmError::Undeclared {
        line,
        kind,
        name: name.to_string(),
    }
}

fn check_ident(line: usize, s: &str) -> Result<(), TrmError> {
    let ok = !s.is_empty()
        && s.chars().all(|c| c.is_alphanumeric() || c == '_')
        && !s.chars().next().unwrap().is_ascii_digit();
    if ok {
        Ok(())
    } else {
        Err(syntax(line, &format!("`{s}` is not a valid identifier")))
    }
}

fn number(line: usize, s: &str) -> Result<f64, TrmError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| syntax(line, &format!("`{s}` is not a number")))
}

/// Parses a guard such as `x>2 & y<=1`.
pub fn parse_guard(line: usize, text: &str, clocks: &[String]) -> Result<Guard, TrmError> {
    let text = text.trim();
    if text.is_empty() || text == "true" || text == "⊤" {
        return Ok(Guard::top(clocks.len()));
    }
    let mut atoms = Vec::new();
    for part in text.split(['&', ',']) {
        let part = part.trim();
        if part.is_empty() {
            return Err(syntax(line, "empty guard atom"));
        }
        let ops: [(&str, CmpOp); 8] = [
            ("<=", CmpOp::Le),
            ("≤", CmpOp::Le),
            (">=", CmpOp::Ge),
            ("≥", CmpOp::Ge),
            ("==", CmpOp::Eq),
            ("<", CmpOp::Lt),
            (">", CmpOp::Gt),
            ("=", CmpOp::Eq),
        ];
        let (pos, sym, op) = ops
            .iter()
            .filter_map(|(sym, op)| part.find(sym).map(|p| (p, *sym, *op)))
            .min_by_key(|(p, sym, _)| (*p, std::cmp::Reverse(sym.len())))
            .ok_or_else(|| syntax(line, &format!("cannot parse guard atom `{part}`")))?;
        let clock = part[..pos].trim();
        let constant = part[pos + sym.len()..].trim();
        let clock = clocks
            .iter()
            .position(|c| c == clock)
            .ok_or_else(|| undeclared(line, "clock", clock))?;
        let constant: u32 = constant
            .parse()
            .map_err(|_| syntax(line, &format!("guard constant `{constant}` must be a non-negative integer")))?;
        atoms.push(GuardAtom { clock, op, constant });
    }
    Guard::new(atoms, clocks.len()).map_err(|source| TrmError::Unsatisfiable { line, source })
}

/// Parses a label formula over the given alphabet.
pub fn parse_label(line: usize, text: &str, props: &[String]) -> Result<LabelFormula, TrmError> {
    let tokens = tokenize(line, text)?;
    let mut p = LabelParser {
        tokens,
        pos: 0,
        line,
        props,
    };
    let f = p.or()?;
    if p.pos != p.tokens.len() {
        return Err(syntax(line, &format!("unexpected `{}` in label", p.tokens[p.pos])));
    }
    Ok(f)
}

fn tokenize(line: usize, text: &str) -> Result<Vec<String>, TrmError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' => {
                chars.next();
            }
            '!' | '&' | '|' | '(' | ')' | '¬' | '∧' | '∨' => {
                chars.next();
                out.push(
                    match c {
                        '¬' => '!',
                        '∧' => '&',
                        '∨' => '|',
                        other => other,
                    }
                    .to_string(),
                );
            }
            '{' => {
                chars.next();
                if chars.next() != Some('}') {
                    return Err(syntax(line, "`{` must be followed by `}`"));
                }
                out.push("empty".into());
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(s);
            }
            other => return Err(syntax(line, &format!("unexpected character `{other}` in label"))),
        }
    }
    if out.is_empty() {
        return Err(syntax(line, "empty label"));
    }
    Ok(out)
}

struct LabelParser<'a> {
    tokens: Vec<String>,
    pos: usize,
    line: usize,
    props: &'a [String],
}

impl LabelParser<'_> {
    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(String::as_str)
    }

    fn or(&mut self) -> Result<LabelFormula, TrmError> {
        let mut f = self.and()?;
        while self.peek() == Some("|") {
            self.pos += 1;
            f = LabelFormula::Or(Box::new(f), Box::new(self.and()?));
        }
        Ok(f)
    }

    fn and(&mut self) -> Result<LabelFormula, TrmError> {
        let mut f = self.unary()?;
        while self.peek() == Some("&") {
            self.pos += 1;
            f = LabelFormula::And(Box::new(f), Box::new(self.unary()?));
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<LabelFormula, TrmError> {
        let tok = self
            .peek()
            .ok_or_else(|| syntax(self.line, "label ends unexpectedly"))?
            .to_string();
        self.pos += 1;
        match tok.as_str() {
            "!" => Ok(LabelFormula::Not(Box::new(self.unary()?))),
            "(" => {
                let f = self.or()?;
                if self.peek() != Some(")") {
                    return Err(syntax(self.line, "missing `)` in label"));
                }
                self.pos += 1;
                Ok(f)
            }
            "any" | "true" => Ok(LabelFormula::Any),
            "empty" => Ok(LabelFormula::Empty),
            "&" | "|" | ")" => Err(syntax(self.line, &format!("unexpected `{tok}` in label"))),
            name => self
                .props
                .iter()
                .position(|p| p == name)
                .map(LabelFormula::Prop)
                .ok_or_else(|| undeclared(self.line, "proposition", name)),
        }
    }
}

/// An input on which no transition fires.
#[derive(Clone, Debug, PartialEq)]
pub struct Gap {
    pub state: StateId,
    pub label: PropSet,
    /// A clock valuation (after the delay) witnessing the gap.
    pub valuation: Vec<f64>,
}

/// Searches every non-terminal state for admissible labels and clock
/// valuations that no transition accepts. Each clock ranges over the
/// elementary intervals cut by the guard constants mentioning it, plus `∞`.
pub fn audit_completeness(trm: &Trm) -> Vec<Gap> {
    let n = trm.num_clocks();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut consts: Vec<Vec<u32>> = vec![vec![0]; n];
    for t in trm.transitions() {
        for a in t.guard.atoms() {
            consts[a.clock].push(a.constant);
        }
    }
    for (x, cs) in consts.iter_mut().enumerate() {
        cs.sort_unstable();
        cs.dedup();
        for (i, c) in cs.iter().enumerate() {
            samples[x].push(*c as f64);
            let next = cs.get(i + 1).map(|n| *n as f64).unwrap_or(*c as f64 + 1.0);
            samples[x].push((*c as f64 + next) / 2.0);
        }
        samples[x].push(f64::INFINITY);
    }
    let labels: Vec<PropSet> = admissible_labels(trm.props().len(), trm.exclusive_groups()).collect();
    let mut gaps = Vec::new();
    let mut point = vec![0.0; n];
    for u in 0..trm.num_states() {
        if trm.is_terminal(u) {
            continue;
        }
        let mut idx = vec![0usize; n];
        loop {
            for x in 0..n {
                point[x] = samples[x][idx[x]];
            }
            for &l in &labels {
                if trm.fire(u, l, |g| g.satisfied_by(&point)).is_none() {
                    gaps.push(Gap {
                        state: u,
                        label: l,
                        valuation: point.clone(),
                    });
                }
            }
            let mut k = 0;
            while k < n {
                idx[k] += 1;
                if idx[k] < samples[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
    }
    gaps
}
