mod common;

use proptest::prelude::*;
use timed_rm::regions::{CornerConfig, RegionSpace};
use timed_rm::trm::{ClockValuation, Semantics};

fn max_constants() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..=3, 1..=3)
}

/// Clock values on the 1/8 grid, up to a few units past the maximum.
fn eighths(max: &[u32]) -> impl Strategy<Value = Vec<u64>> {
    let ranges: Vec<_> = max.iter().map(|m| 0u64..=(*m as u64 + 3) * 8).collect();
    ranges
}

proptest! {
    #[test]
    fn classified_regions_are_enumerated((max, v) in max_constants().prop_flat_map(|m| (Just(m.clone()), eighths(&m)))) {
        let space = RegionSpace::new(max);
        let r = space.region_of(&ClockValuation(v.iter().map(|x| *x as f64 / 8.0).collect()));
        prop_assert!(space.is_valid(&r));
        prop_assert!(space.enumerate().contains(&r));
    }

    #[test]
    fn elapsing_time_walks_the_successor_chain((max, v) in max_constants().prop_flat_map(|m| (Just(m.clone()), eighths(&m)))) {
        let space = RegionSpace::new(max.clone());
        let horizon = (*max.iter().max().unwrap() as u64 + 2) * 16;
        let mut prev = space.region_of(&ClockValuation(v.iter().map(|x| *x as f64 / 8.0).collect()));
        // sixteenths hit every event of an eighth-grid valuation and every gap between two
        for t in 1..=horizon {
            let now = space.region_of(&ClockValuation(
                v.iter().map(|x| *x as f64 / 8.0 + t as f64 / 16.0).collect(),
            ));
            if now != prev {
                prop_assert_eq!(&now, &space.time_successor(&prev));
                prev = now;
            }
        }
        prop_assert!((0..max.len()).all(|x| prev.is_saturated(x)));
        prop_assert_eq!(space.time_successor(&prev), prev);
    }

    #[test]
    fn concretized_corners_stay_in_region(max in max_constants(), pick in any::<prop::sample::Index>(), k in any::<prop::sample::Index>()) {
        let space = RegionSpace::new(max.clone());
        let regions = space.enumerate();
        let region = pick.get(&regions).clone();
        let corners = space.corners(&region);
        let corner = k.get(&corners).clone();
        let eps = 0.9 / (2.0 * (max.len() as f64 + 1.0));
        let v = space.concretize(&CornerConfig { region: region.clone(), corner: corner.clone() }, eps).unwrap();
        prop_assert_eq!(space.region_of(&v), region.clone());
        for x in 0..max.len() {
            if !region.is_saturated(x) {
                prop_assert!((v.values()[x] - corner[x] as f64).abs() < eps);
            }
        }
    }

    #[test]
    fn bounding_delays_keeps_the_run(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let (_, trm) = common::random_machine(&mut r, common::MachineShape::default());
        let m = common::global_max_constant(&trm);
        let t = common::random_trajectory(&mut r, 10, 3 * m + 2, 4);
        let a = trm.run(&t.timed_word()).unwrap();
        let b = trm.run(&t.bound_delays(m as f64).timed_word()).unwrap();
        prop_assert_eq!(a.transitions(), b.transitions());
        prop_assert_eq!(a.states(), b.states());
    }

    #[test]
    fn bounded_delays_never_lose_return_on_good_trajectories(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let shape = common::MachineShape { negative_rates: true, terminal_reward: (20.0, 80.0), ..Default::default() };
        let (_, trm) = common::random_machine(&mut r, shape);
        let m = common::global_max_constant(&trm);
        for (ticks, sem) in [(1, Semantics::Digital), (4, Semantics::RealTime)] {
            let t = common::random_trajectory(&mut r, 6, 2 * m + 4, ticks);
            let good = common::suffix_returns(&trm, &t, 0.9, sem).iter().all(|g| *g > 0.0);
            prop_assume!(good);
            let g = trm.discounted_return(&t, 0.9, sem).unwrap();
            let gb = trm.discounted_return(&t.bound_delays(m as f64), 0.9, sem).unwrap();
            prop_assert!(gb >= g - 1e-9, "{gb} < {g}");
        }
    }

    #[test]
    fn suffix_returns_fold_to_the_total(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let (_, trm) = common::random_machine(&mut r, common::MachineShape::default());
        let t = common::random_trajectory(&mut r, 8, 5, 4);
        for sem in [Semantics::Digital, Semantics::RealTime] {
            let total = trm.discounted_return(&t, 0.9, sem).unwrap();
            let first = common::suffix_returns(&trm, &t, 0.9, sem).first().copied().unwrap_or(0.0);
            prop_assert!((total - first).abs() < 1e-9);
        }
    }
}
