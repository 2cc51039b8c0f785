//! Machines shipped with the crate.

use crate::trm::{parse_trm, Trm};

pub const FIG3: &str = include_str!("../assets/trms/fig3.trm");
pub const FIG6: &str = include_str!("../assets/trms/fig6.trm");
pub const TRM1: &str = include_str!("../assets/trms/trm1.trm");
pub const TRM2: &str = include_str!("../assets/trms/trm2.trm");
pub const TRM3: &str = include_str!("../assets/trms/trm3.trm");
pub const TRM4: &str = include_str!("../assets/trms/trm4.trm");

/// Names accepted by [`source`] and [`load`].
pub const NAMES: [&str; 6] = ["fig3", "fig6", "trm1", "trm2", "trm3", "trm4"];

pub fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig3" => FIG3,
        "fig6" => FIG6,
        "trm1" => TRM1,
        "trm2" => TRM2,
        "trm3" => TRM3,
        "trm4" => TRM4,
        _ => return None,
    })
}

/// Parses a bundled machine.
///
/// # Panics
///
/// Panics if `name` is not one of [`NAMES`].
pub fn load(name: &str) -> Trm {
    let src = source(name).unwrap_or_else(|| panic!("no bundled machine named `{name}`"));
    parse_trm(src).expect("bundled machines are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_parse_and_are_deterministic() {
        for n in NAMES {
            let t = load(n);
            assert!(t.check_deterministic().is_empty(), "{n}");
            assert_eq!(t.name, n);
        }
    }

    #[test]
    fn max_constants_match_guards() {
        let m = load("fig3").max_constants();
        assert_eq!((m.per_clock, m.delay), (vec![5], 5));
        let m = load("trm1").max_constants();
        assert_eq!((m.per_clock, m.delay), (vec![15], 10));
        let m = load("trm2").max_constants();
        assert_eq!((m.per_clock, m.delay), (vec![15, 1], 1));
        let m = load("fig6").max_constants();
        assert_eq!((m.per_clock, m.delay), (vec![3, 1], 3));
    }

    #[test]
    fn trm1_shape() {
        let t = load("trm1");
        assert_eq!(t.num_states() - t.terminals().count(), 4);
        assert_eq!(t.terminals().count(), 1);
        assert_eq!(t.clocks(), ["x"]);
        assert_eq!(t.props(), ["in_taxi", "at_green", "at_dest", "drop_off"]);
    }
}
