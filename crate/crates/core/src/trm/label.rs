//! Proposition sets and the boolean label formulas carried by transitions.

use std::fmt;

/// A set of propositions, stored as a bitmask over an alphabet of at most 64
/// identifiers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropSet(pub u64);

impl PropSet {
    pub const EMPTY: PropSet = PropSet(0);

    pub fn singleton(index: usize) -> Self {
        PropSet(1 << index)
    }

    pub fn contains(self, index: usize) -> bool {
        self.0 & (1 << index) != 0
    }

    pub fn insert(&mut self, index: usize) {
        self.0 |= 1 << index;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: PropSet) -> PropSet {
        PropSet(self.0 | other.0)
    }

    pub fn intersection(self, other: PropSet) -> PropSet {
        PropSet(self.0 & other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |i| self.contains(*i))
    }

    /// Renders the set as `{a, b}` using the given alphabet.
    pub fn render(self, names: &[String]) -> String {
        let parts: Vec<&str> = self
            .iter()
            .map(|i| names.get(i).map(String::as_str).unwrap_or("?"))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// Boolean formula over proposition indices, evaluated against an observed
/// label set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelFormula {
    /// Matches every label set.
    Any,
    /// Matches only the empty label set.
    Empty,
    Prop(usize),
    Not(Box<LabelFormula>),
    And(Box<LabelFormula>, Box<LabelFormula>),
    Or(Box<LabelFormula>, Box<LabelFormula>),
}

impl LabelFormula {
    pub fn eval(&self, label: PropSet) -> bool {
        match self {
            LabelFormula::Any => true,
            LabelFormula::Empty => label.is_empty(),
            LabelFormula::Prop(i) => label.contains(*i),
            LabelFormula::Not(f) => !f.eval(label),
            LabelFormula::And(a, b) => a.eval(label) && b.eval(label),
            LabelFormula::Or(a, b) => a.eval(label) || b.eval(label),
        }
    }

    /// Formula satisfied by exactly one label set.
    pub fn exact(set: PropSet, alphabet_len: usize) -> Self {
        if alphabet_len == 0 {
            return LabelFormula::Any;
        }
        (0..alphabet_len)
            .map(|i| {
                if set.contains(i) {
                    LabelFormula::Prop(i)
                } else {
                    LabelFormula::Not(Box::new(LabelFormula::Prop(i)))
                }
            })
            .reduce(|a, b| LabelFormula::And(Box::new(a), Box::new(b)))
            .unwrap()
    }

    /// Highest proposition index referenced, if any.
    pub fn max_prop(&self) -> Option<usize> {
        match self {
            LabelFormula::Any | LabelFormula::Empty => None,
            LabelFormula::Prop(i) => Some(*i),
            LabelFormula::Not(f) => f.max_prop(),
            LabelFormula::And(a, b) | LabelFormula::Or(a, b) => a.max_prop().max(b.max_prop()),
        }
    }

    pub fn render(&self, names: &[String]) -> String {
        self.render_prec(names, 0)
    }

    fn render_prec(&self, names: &[String], prec: u8) -> String {
        let name = |i: usize| names.get(i).cloned().unwrap_or_else(|| format!("p{i}"));
        match self {
            LabelFormula::Any => "any".into(),
            LabelFormula::Empty => "empty".into(),
            LabelFormula::Prop(i) => name(*i),
            LabelFormula::Not(f) => format!("!{}", f.render_prec(names, 3)),
            LabelFormula::And(a, b) => {
                let s = format!("{} & {}", a.render_prec(names, 2), b.render_prec(names, 2));
                if prec > 2 {
                    format!("({s})")
                } else {
                    s
                }
            }
            LabelFormula::Or(a, b) => {
                let s = format!("{} | {}", a.render_prec(names, 1), b.render_prec(names, 1));
                if prec > 1 {
                    format!("({s})")
                } else {
                    s
                }
            }
        }
    }
}

impl fmt::Display for PropSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}

/// Enumerates the label sets that may be observed over an alphabet of `n`
/// propositions, skipping sets that contain two members of the same
/// mutually-exclusive group.
pub fn admissible_labels(n: usize, exclusive: &[PropSet]) -> impl Iterator<Item = PropSet> + '_ {
    assert!(n <= 24, "label enumeration over {n} propositions is too large");
    (0u64..(1u64 << n))
        .map(PropSet)
        .filter(move |l| exclusive.iter().all(|g| l.intersection(*g).len() <= 1))
}
