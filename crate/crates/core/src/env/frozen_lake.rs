use rand::Rng;

use super::{prop_names, EnvOutcome, Environment, SimRng};
use crate::trm::PropSet;

/// Bundled 8×8 layout with goals `A`, `B`, `C` and ten holes.
pub const DEFAULT_MAP: &str = include_str!("../../assets/maps/frozen_lake.txt");

const ACTIONS: [&str; 4] = ["left", "down", "right", "up"];
const SUCCESS: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cell {
    Start,
    Frozen,
    Hole,
    Goal(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("map must have 8 rows, found {0}")]
    Rows(usize),
    #[error("row {row} must have 8 cells, found {len}")]
    Columns { row: usize, len: usize },
    #[error("unknown cell `{ch}` at row {row}, column {col}")]
    Cell { row: usize, col: usize, ch: char },
    #[error("map needs exactly one start cell, found {0}")]
    Start(usize),
}

/// Slippery 8×8 lake: the intended move succeeds with probability 0.8 and
/// each perpendicular move happens with probability 0.1. Goals and holes
/// only emit labels; nothing terminates at the environment level.
#[derive(Clone, Debug)]
pub struct FrozenLake {
    cells: Vec<Cell>,
    start: usize,
    props: Vec<String>,
}

impl FrozenLake {
    pub const SIZE: usize = 8;

    pub fn default_map() -> FrozenLake {
        Self::from_map(DEFAULT_MAP).expect("bundled map is valid")
    }

    /// Parses 8 lines of 8 characters from `S`, `F`, `H`, `A`, `B`, `C`.
    pub fn from_map(text: &str) -> Result<FrozenLake, MapError> {
        let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if rows.len() != Self::SIZE {
            return Err(MapError::Rows(rows.len()));
        }
        let mut cells = Vec::with_capacity(64);
        for (row, line) in rows.iter().enumerate() {
            let chars: Vec<char> = line.chars().collect();
            if chars.len() != Self::SIZE {
                return Err(MapError::Columns { row, len: chars.len() });
            }
            for (col, ch) in chars.into_iter().enumerate() {
                cells.push(match ch {
                    'S' => Cell::Start,
                    'F' => Cell::Frozen,
                    'H' => Cell::Hole,
                    'A' => Cell::Goal(0),
                    'B' => Cell::Goal(1),
                    'C' => Cell::Goal(2),
                    ch => return Err(MapError::Cell { row, col, ch }),
                });
            }
        }
        let starts: Vec<usize> = (0..cells.len()).filter(|i| cells[*i] == Cell::Start).collect();
        if starts.len() != 1 {
            return Err(MapError::Start(starts.len()));
        }
        Ok(FrozenLake {
            cells,
            start: starts[0],
            props: prop_names(&["a", "b", "c", "h"]),
        })
    }

    fn moved(s: usize, dir: usize) -> usize {
        let (row, col) = (s / Self::SIZE, s % Self::SIZE);
        let (r, c) = match dir {
            0 => (row, col.saturating_sub(1)),
            1 => ((row + 1).min(Self::SIZE - 1), col),
            2 => (row, (col + 1).min(Self::SIZE - 1)),
            _ => (row.saturating_sub(1), col),
        };
        r * Self::SIZE + c
    }

    /// Intended direction followed by the two perpendicular slips.
    fn directions(a: usize) -> [usize; 3] {
        [a, (a + 3) % 4, (a + 1) % 4]
    }

    pub fn holes(&self) -> usize {
        self.cells.iter().filter(|c| **c == Cell::Hole).count()
    }
}

impl Environment for FrozenLake {
    fn name(&self) -> &str {
        "frozen_lake"
    }

    fn num_states(&self) -> usize {
        Self::SIZE * Self::SIZE
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn action_name(&self, a: usize) -> String {
        ACTIONS[a].to_string()
    }

    fn state_name(&self, s: usize) -> String {
        format!("r{}c{}", s / Self::SIZE, s % Self::SIZE)
    }

    fn propositions(&self) -> &[String] {
        &self.props
    }

    fn reset(&self, _rng: &mut SimRng) -> usize {
        self.start
    }

    fn transitions(&self, s: usize, a: usize) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(3);
        let probs = [SUCCESS, (1.0 - SUCCESS) / 2.0, (1.0 - SUCCESS) / 2.0];
        for (dir, p) in Self::directions(a).into_iter().zip(probs) {
            let next = Self::moved(s, dir);
            match out.iter_mut().find(|(n, _)| *n == next) {
                Some(entry) => entry.1 += p,
                None => out.push((next, p)),
            }
        }
        out
    }

    fn labels(&self, _s: usize, _a: usize, next: usize) -> PropSet {
        match self.cells[next] {
            Cell::Goal(i) => PropSet::singleton(i),
            Cell::Hole => PropSet::singleton(3),
            _ => PropSet::EMPTY,
        }
    }

    fn step(&self, s: usize, a: usize, rng: &mut SimRng) -> EnvOutcome {
        let u: f64 = rng.random();
        let [intended, left, right] = Self::directions(a);
        let dir = if u < SUCCESS {
            intended
        } else if u < SUCCESS + (1.0 - SUCCESS) / 2.0 {
            left
        } else {
            right
        };
        let next = Self::moved(s, dir);
        EnvOutcome {
            next,
            labels: self.labels(s, a, next),
            env_done: false,
        }
    }
}
