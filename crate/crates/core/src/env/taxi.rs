use super::{prop_names, Environment, SimRng};
use crate::trm::PropSet;

/// The 5×5 taxi domain with the standard wall layout.
///
/// ```text
/// +---------+
/// |R: | : :G|
/// | : | : : |
/// | : : : : |
/// | | : | : |
/// |Y| : |B: |
/// +---------+
/// ```
///
/// States encode `((row * 5 + col) * 5 + passenger) * 4 + destination`,
/// where passenger index 4 means "in the taxi".
#[derive(Clone, Debug)]
pub struct Taxi {
    props: Vec<String>,
    start: usize,
}

pub(crate) const LOCS: [(usize, usize); 4] = [(0, 0), (0, 4), (4, 0), (4, 3)];
const ACTIONS: [&str; 6] = ["south", "north", "east", "west", "pickup", "dropoff"];
// cells with a wall on their east side
const EAST_WALLS: [(usize, usize); 6] = [(0, 1), (1, 1), (3, 0), (3, 2), (4, 0), (4, 2)];

pub(crate) const IN_TAXI: usize = 0;
pub(crate) const PICK_PASS: usize = 1;
pub(crate) const DROP_OFF: usize = 2;
pub(crate) const AT_DEST: usize = 3;
const AT_LOC: [usize; 4] = [4, 5, 6, 7];

impl Default for Taxi {
    fn default() -> Self {
        Self::new()
    }
}

impl Taxi {
    /// Taxi in the centre, passenger at red, destination blue.
    pub fn new() -> Taxi {
        Taxi::with_start(2, 2, 0, 3)
    }

    pub fn with_start(row: usize, col: usize, passenger: usize, destination: usize) -> Taxi {
        assert!(row < 5 && col < 5 && passenger < 5 && destination < 4);
        Taxi {
            props: prop_names(&[
                "in_taxi",
                "pick_pass",
                "drop_off",
                "at_dest",
                "at_red",
                "at_green",
                "at_yellow",
                "at_blue",
            ]),
            start: Self::encode(row, col, passenger, destination),
        }
    }

    pub fn encode(row: usize, col: usize, passenger: usize, destination: usize) -> usize {
        ((row * 5 + col) * 5 + passenger) * 4 + destination
    }

    pub fn decode(s: usize) -> (usize, usize, usize, usize) {
        let dest = s % 4;
        let rest = s / 4;
        let pass = rest % 5;
        let cell = rest / 5;
        (cell / 5, cell % 5, pass, dest)
    }

    fn next_state(s: usize, a: usize) -> usize {
        let (row, col, pass, dest) = Self::decode(s);
        let (mut r, mut c, mut p) = (row, col, pass);
        match a {
            0 => r = (row + 1).min(4),
            1 => r = row.saturating_sub(1),
            2 if !EAST_WALLS.contains(&(row, col)) => c = (col + 1).min(4),
            3 if col > 0 && !EAST_WALLS.contains(&(row, col - 1)) => c = col - 1,
            4 if pass < 4 && LOCS[pass] == (row, col) => p = 4,
            5 if pass == 4 => {
                if let Some(i) = LOCS.iter().position(|l| *l == (row, col)) {
                    p = i;
                }
            }
            _ => {}
        }
        Self::encode(r, c, p, dest)
    }
}

impl Environment for Taxi {
    fn name(&self) -> &str {
        "taxi"
    }

    fn num_states(&self) -> usize {
        500
    }

    fn num_actions(&self) -> usize {
        6
    }

    fn action_name(&self, a: usize) -> String {
        ACTIONS[a].to_string()
    }

    fn state_name(&self, s: usize) -> String {
        let (row, col, pass, dest) = Self::decode(s);
        format!("r{row}c{col}p{pass}d{dest}")
    }

    fn propositions(&self) -> &[String] {
        &self.props
    }

    fn reset(&self, _rng: &mut SimRng) -> usize {
        self.start
    }

    fn transitions(&self, s: usize, a: usize) -> Vec<(usize, f64)> {
        vec![(Self::next_state(s, a), 1.0)]
    }

    fn labels(&self, s: usize, _a: usize, next: usize) -> PropSet {
        let (_, _, pass, _) = Self::decode(s);
        let (row, col, npass, dest) = Self::decode(next);
        let mut l = PropSet::EMPTY;
        if npass == 4 {
            l.insert(IN_TAXI);
        }
        if pass < 4 && npass == 4 {
            l.insert(PICK_PASS);
        }
        if pass == 4 && npass == dest {
            l.insert(DROP_OFF);
        }
        if LOCS[dest] == (row, col) {
            l.insert(AT_DEST);
        }
        for (i, loc) in LOCS.iter().enumerate() {
            if *loc == (row, col) {
                l.insert(AT_LOC[i]);
            }
        }
        l
    }
}
