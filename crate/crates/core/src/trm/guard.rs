//! Clock constraints.
//!
//! A guard is a conjunction of atoms `x ⋈ c`. On construction the atoms are
//! folded into one interval per clock over `[0, ∞]`, so satisfaction and
//! intersection checks never look at the atoms again.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of a clock inside its machine.
pub type ClockId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    /// True for operators that bound the clock from below (`>`, `>=`, `=`).
    pub fn is_lower_bound(self) -> bool {
        matches!(self, CmpOp::Gt | CmpOp::Ge | CmpOp::Eq)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GuardAtom {
    pub clock: ClockId,
    pub op: CmpOp,
    pub constant: u32,
}

/// An interval over `[0, ∞]` with integer end points. A missing upper bound
/// means the interval is unbounded and contains `∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: u32,
    pub lo_closed: bool,
    pub hi: Option<(u32, bool)>,
}

impl Interval {
    pub const FULL: Interval = Interval {
        lo: 0,
        lo_closed: true,
        hi: None,
    };

    fn from_atom(op: CmpOp, c: u32) -> Interval {
        match op {
            CmpOp::Lt => Interval {
                lo: 0,
                lo_closed: true,
                hi: Some((c, false)),
            },
            CmpOp::Le => Interval {
                lo: 0,
                lo_closed: true,
                hi: Some((c, true)),
            },
            CmpOp::Eq => Interval {
                lo: c,
                lo_closed: true,
                hi: Some((c, true)),
            },
            CmpOp::Ge => Interval {
                lo: c,
                lo_closed: true,
                hi: None,
            },
            CmpOp::Gt => Interval {
                lo: c,
                lo_closed: false,
                hi: None,
            },
        }
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = match self.lo.cmp(&other.lo) {
            std::cmp::Ordering::Greater => (self.lo, self.lo_closed),
            std::cmp::Ordering::Less => (other.lo, other.lo_closed),
            std::cmp::Ordering::Equal => (self.lo, self.lo_closed && other.lo_closed),
        };
        let hi = match (self.hi, other.hi) {
            (None, h) | (h, None) => h,
            (Some((a, ac)), Some((b, bc))) => Some(match a.cmp(&b) {
                std::cmp::Ordering::Less => (a, ac),
                std::cmp::Ordering::Greater => (b, bc),
                std::cmp::Ordering::Equal => (a, ac && bc),
            }),
        };
        Interval { lo, lo_closed, hi }
    }

    /// Empty over the non-negative reals.
    pub fn is_empty(&self) -> bool {
        match self.hi {
            None => false,
            Some((h, hc)) => self.lo > h || (self.lo == h && !(self.lo_closed && hc)),
        }
    }

    /// Membership of a clock value; `f64::INFINITY` stands for a saturated
    /// clock and only lies in unbounded intervals.
    pub fn contains(&self, value: f64) -> bool {
        if value.is_infinite() {
            return self.hi.is_none();
        }
        let lo = self.lo as f64;
        let lower_ok = if self.lo_closed { value >= lo } else { value > lo };
        let upper_ok = match self.hi {
            None => true,
            Some((h, true)) => value <= h as f64,
            Some((h, false)) => value < h as f64,
        };
        lower_ok && upper_ok
    }

    pub fn is_full(&self) -> bool {
        *self == Interval::FULL
    }
}

/// A conjunction of clock constraints; the empty conjunction is `⊤`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Guard {
    atoms: Vec<GuardAtom>,
    bounds: Vec<Interval>,
}

/// The atoms of a guard admit no valuation.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("guard is unsatisfiable on clock {clock}")]
pub struct UnsatisfiableGuard {
    pub clock: ClockId,
}

impl Guard {
    pub fn top(n_clocks: usize) -> Guard {
        Guard {
            atoms: Vec::new(),
            bounds: vec![Interval::FULL; n_clocks],
        }
    }

    pub fn new(atoms: Vec<GuardAtom>, n_clocks: usize) -> Result<Guard, UnsatisfiableGuard> {
        let mut bounds = vec![Interval::FULL; n_clocks];
        for a in &atoms {
            assert!(a.clock < n_clocks, "atom references unknown clock");
            bounds[a.clock] = bounds[a.clock].intersect(&Interval::from_atom(a.op, a.constant));
        }
        if let Some(clock) = bounds.iter().position(Interval::is_empty) {
            return Err(UnsatisfiableGuard { clock });
        }
        Ok(Guard { atoms, bounds })
    }

    pub fn atoms(&self) -> &[GuardAtom] {
        &self.atoms
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn is_top(&self) -> bool {
        self.bounds.iter().all(Interval::is_full)
    }

    pub fn satisfied_by(&self, values: &[f64]) -> bool {
        self.bounds
            .iter()
            .zip(values)
            .all(|(iv, v)| iv.contains(*v))
    }

    /// Some valuation satisfies both guards.
    pub fn intersects(&self, other: &Guard) -> bool {
        self.bounds
            .iter()
            .zip(&other.bounds)
            .all(|(a, b)| !a.intersect(b).is_empty())
    }

    pub fn render(&self, clocks: &[String]) -> String {
        if self.atoms.is_empty() {
            return "true".into();
        }
        self.atoms
            .iter()
            .map(|a| format!("{}{}{}", clocks[a.clock], a.op.symbol(), a.constant))
            .collect::<Vec<_>>()
            .join(" & ")
    }
}

impl fmt::Display for GuardAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}{}{}", self.clock, self.op.symbol(), self.constant)
    }
}
