use super::{prop_names, Environment, SimRng};
use crate::trm::PropSet;

/// A 2×2 grid. `s0` bottom-left, `s1` top-left, `s2` top-right, `s3`
/// bottom-right; `p` is observed on entering `s1`, `q` on entering `s3`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Grid2x2;

const GRID_ACTIONS: [&str; 4] = ["up", "down", "left", "right"];
// (column, row) per state, row 1 on top
const GRID_CELLS: [(i32, i32); 4] = [(0, 0), (0, 1), (1, 1), (1, 0)];

impl Grid2x2 {
    fn cell_state(col: i32, row: i32) -> usize {
        GRID_CELLS.iter().position(|c| *c == (col, row)).unwrap()
    }

    fn props() -> &'static [String] {
        static PROPS: std::sync::OnceLock<Vec<String>> = std::sync::OnceLock::new();
        PROPS.get_or_init(|| prop_names(&["p", "q"]))
    }
}

impl Environment for Grid2x2 {
    fn name(&self) -> &str {
        "grid2x2"
    }

    fn num_states(&self) -> usize {
        4
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn action_name(&self, a: usize) -> String {
        GRID_ACTIONS[a].to_string()
    }

    fn state_name(&self, s: usize) -> String {
        format!("s{s}")
    }

    fn propositions(&self) -> &[String] {
        Self::props()
    }

    fn reset(&self, _rng: &mut SimRng) -> usize {
        0
    }

    fn transitions(&self, s: usize, a: usize) -> Vec<(usize, f64)> {
        let (col, row) = GRID_CELLS[s];
        let (dc, dr) = [(0, 1), (0, -1), (-1, 0), (1, 0)][a];
        let (nc, nr) = (col + dc, row + dr);
        let next = if (0..2).contains(&nc) && (0..2).contains(&nr) {
            Self::cell_state(nc, nr)
        } else {
            s
        };
        vec![(next, 1.0)]
    }

    fn labels(&self, s: usize, _a: usize, next: usize) -> PropSet {
        let mut l = PropSet::EMPTY;
        if next != s && next == 1 {
            l.insert(0);
        }
        if next != s && next == 3 {
            l.insert(1);
        }
        l
    }
}

/// A corridor `s0 - s1 - s2` walked with a single `right` action; `p` is
/// observed on entering `s2`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Line3;

impl Line3 {
    fn props() -> &'static [String] {
        static PROPS: std::sync::OnceLock<Vec<String>> = std::sync::OnceLock::new();
        PROPS.get_or_init(|| prop_names(&["p"]))
    }
}

impl Environment for Line3 {
    fn name(&self) -> &str {
        "line3"
    }

    fn num_states(&self) -> usize {
        3
    }

    fn num_actions(&self) -> usize {
        1
    }

    fn action_name(&self, _a: usize) -> String {
        "right".to_string()
    }

    fn state_name(&self, s: usize) -> String {
        format!("s{s}")
    }

    fn propositions(&self) -> &[String] {
        Self::props()
    }

    fn reset(&self, _rng: &mut SimRng) -> usize {
        0
    }

    fn transitions(&self, s: usize, _a: usize) -> Vec<(usize, f64)> {
        vec![((s + 1).min(2), 1.0)]
    }

    fn labels(&self, s: usize, _a: usize, next: usize) -> PropSet {
        if next == 2 && s != 2 {
            PropSet::singleton(0)
        } else {
            PropSet::EMPTY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::rng_from_seed;

    #[test]
    fn grid_moves_and_labels() {
        let g = Grid2x2;
        let mut rng = rng_from_seed(0);
        let up = g.action_index("up").unwrap();
        let out = g.step(0, up, &mut rng);
        assert_eq!(out.next, 1);
        assert_eq!(out.labels, PropSet::singleton(0));
        assert_eq!(g.step(1, g.action_index("right").unwrap(), &mut rng).next, 2);
        let down = g.step(2, g.action_index("down").unwrap(), &mut rng);
        assert_eq!((down.next, down.labels), (3, PropSet::singleton(1)));
        // bumping into the boundary keeps the cell and emits nothing
        let bump = g.step(1, up, &mut rng);
        assert_eq!((bump.next, bump.labels), (1, PropSet::EMPTY));
    }

    #[test]
    fn line_reaches_goal() {
        let l = Line3;
        let mut rng = rng_from_seed(0);
        assert_eq!(l.step(0, 0, &mut rng).labels, PropSet::EMPTY);
        assert_eq!(l.step(1, 0, &mut rng).labels, PropSet::singleton(0));
        let end = l.step(2, 0, &mut rng);
        assert_eq!((end.next, end.labels), (2, PropSet::EMPTY));
    }
}
