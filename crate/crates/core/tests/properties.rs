mod common;

use common::*;
use proptest::prelude::*;
use ratebench_core::imf::{ImfConfig, LowRankState};
use ratebench_core::ubcf::{UbcfConfig, UbcfModel};
use ratebench_core::similarity::pair_similarity;
use ratebench_core::{Axis, Metric, Predictor};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ubcf_stays_within_neighbor_deviation(seed in any::<u64>(), pearson in any::<bool>(), k in 1usize..8) {
        let grid = random_grid(&mut seeded(seed), 12, 8, 0.45);
        let ds = grid_to_dataset(&grid);
        let metric = if pearson { Metric::Pearson } else { Metric::Cosine };
        let model = UbcfModel::fit(&ds, UbcfConfig { metric, k, shrink: None }).unwrap();
        let stats = model.stats();
        let spread = ds
            .ratings()
            .iter()
            .map(|r| (r.value - stats.user_means[r.user]).abs())
            .fold(0.0, f64::max);
        for u in 0..12 {
            if stats.user_counts[u] == 0 {
                continue;
            }
            for i in 0..8 {
                let p = model.predict(u, i);
                prop_assert!((p - stats.user_means[u]).abs() <= spread + 1e-12, "({u},{i}) -> {p}");
            }
        }
    }

    #[test]
    fn imf_reproduces_training_ratings(seed in any::<u64>(), rank in 1usize..4, iterations in 1usize..5) {
        let ds = grid_to_dataset(&random_grid(&mut seeded(seed), 10, 7, 0.5));
        let model = LowRankState::fit(&ds, ImfConfig { rank, iterations }).unwrap();
        for r in ds.ratings() {
            prop_assert!((model.predict(r.user, r.item) - r.value).abs() < 1e-12);
        }
    }

    #[test]
    fn pearson_and_cosine_are_bounded(seed in any::<u64>()) {
        let grid = random_grid(&mut seeded(seed), 8, 10, 0.6);
        let ds = grid_to_dataset(&grid);
        for metric in [Metric::Pearson, Metric::Cosine] {
            for a in 0..8 {
                for b in 0..8 {
                    if a != b {
                        let (s, _) = naive_similarity(&grid, a, b, metric);
                        let ours = pair_similarity(a, b, &ds, Axis::User, metric);
                        prop_assert!(ours.value.abs() <= 1.0 + 1e-12);
                        prop_assert!((ours.value - s).abs() <= 1e-12);
                    }
                }
            }
        }
    }
}
