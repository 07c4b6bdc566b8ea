//! Property tests for the sequential building blocks and redistribution.

use proptest::collection::vec;
use proptest::prelude::*;

use clique_select::oracle::{generate, Distribution, InstanceSpec};
use clique_select::runtime::{CliqueConfig, CliqueState};
use clique_select::sampling::{
    count_in_intervals, find_active_intervals, local_multiselect, local_regular_sample, log_star,
    merge_samples, project_ranks, LogStarMode, RankSet,
};
use clique_select::select::redistribute;
use clique_select::TaggedElement;

fn tagged(keys: &[i64]) -> Vec<TaggedElement> {
    keys.iter()
        .enumerate()
        .map(|(i, &k)| TaggedElement::new(k, 0, i as u32))
        .collect()
}

/// Exact max segment population between consecutive sample items, counting
/// the run-up to the first item; a sampled item closes its segment.
fn exact_max_gap(source: &[TaggedElement], sample: &[TaggedElement]) -> u64 {
    let mut sorted = source.to_vec();
    sorted.sort_unstable();
    let mut max = 0u64;
    let mut consumed = 0usize;
    for y in sample {
        let pos = sorted.partition_point(|e| e < y);
        max = max.max((pos - consumed) as u64);
        consumed = pos + 1;
    }
    max.max((sorted.len() - consumed) as u64)
}

proptest! {
    #[test]
    fn multiselect_agrees_with_sort_oracle(
        keys in vec(-1000i64..1000, 1..256),
        raw_ranks in vec(1u64..=256, 1..10),
    ) {
        let set = tagged(&keys);
        let n = set.len() as u64;
        let ranks: Vec<u64> = raw_ranks.iter().map(|r| 1 + (r - 1) % n).collect();
        let ranks = RankSet::new(ranks).unwrap();
        let mut ops = 0;
        let picked = local_multiselect(&set, &ranks, &mut ops).unwrap();
        let mut sorted = set.clone();
        sorted.sort_unstable();
        let expected: Vec<TaggedElement> =
            ranks.ranks().iter().map(|&r| sorted[(r - 1) as usize]).collect();
        prop_assert_eq!(picked, expected);
    }

    #[test]
    fn local_sample_gap_is_certified(
        keys in vec(-5000i64..5000, 1..300),
        h_seed in 1u64..300,
    ) {
        let set = tagged(&keys);
        let m = set.len() as u64;
        let h = 1 + (h_seed - 1) % m;
        let mut ops = 0;
        let sample = local_regular_sample(&set, h, &mut ops).unwrap();
        prop_assert_eq!(sample.items.len() as u64, h);
        prop_assert_eq!(sample.gap_bound, m.div_ceil(h));
        prop_assert!(exact_max_gap(&set, &sample.items) <= sample.gap_bound);
        // The maximum is always sampled.
        prop_assert_eq!(sample.items.last(), set.iter().max());
    }

    #[test]
    fn merged_sample_certificate_holds(
        seed in 0u64..5000,
        p in 2usize..6,
        per_node in 8usize..40,
        h_seed in 2u64..8,
    ) {
        let mut union: Vec<TaggedElement> = Vec::new();
        let mut sample_union: Vec<TaggedElement> = Vec::new();
        let mut rng = clique_select::rng::SplitMix64::new(seed);
        let h = h_seed.min(per_node as u64);
        let mut per_node_gap = 1u64;
        for v in 0..p {
            let set: Vec<TaggedElement> = (0..per_node)
                .map(|i| TaggedElement::new(rng.next_below(1 << 32) as i64, v as u32, i as u32))
                .collect();
            let mut ops = 0;
            let s = local_regular_sample(&set, h, &mut ops).unwrap();
            per_node_gap = per_node_gap.max(s.gap_bound);
            sample_union.extend_from_slice(&s.items);
            union.extend_from_slice(&set);
        }
        sample_union.sort_unstable();
        let mut ops = 0;
        let merged = merge_samples(&sample_union, h, per_node_gap, p, &mut ops).unwrap();
        prop_assert_eq!(merged.gap_bound, 3 * p as u64 * per_node_gap);
        prop_assert!(exact_max_gap(&union, &merged.items) <= merged.gap_bound);
    }

    #[test]
    fn interval_counts_conserve_and_brackets_locate(
        keys in vec(-1000i64..1000, 2..200),
        h_seed in 1u64..16,
        rank_seeds in vec(1u64..=200, 1..6),
    ) {
        let set = tagged(&keys);
        let m = set.len() as u64;
        let h = 1 + (h_seed - 1) % m;
        let mut ops = 0;
        let sample = local_regular_sample(&set, h, &mut ops).unwrap();
        let counts = count_in_intervals(&set, &sample, &mut ops);
        prop_assert_eq!(counts.total(), m);

        let ranks: Vec<u64> = rank_seeds.iter().map(|r| 1 + (r - 1) % m).collect();
        let targets = RankSet::new(ranks).unwrap();
        let actives = find_active_intervals(&counts, &targets).unwrap();
        // Disjoint, ordered intervals whose residuals fit their sizes.
        for w in actives.windows(2) {
            prop_assert!(w[0].index < w[1].index);
        }
        let mut sorted = set.clone();
        sorted.sort_unstable();
        for interval in &actives {
            prop_assert!(interval.residual_ranks.max() <= interval.size);
            for &res in interval.residual_ranks.ranks() {
                // The element at the global rank really lies in the interval.
                let global = interval.preceding + res;
                let elem = sorted[(global - 1) as usize];
                let mut scratch = 0;
                prop_assert!(interval.contains(&elem, &mut scratch));
            }
        }
        // Projection is strictly increasing and within the survivors.
        let projected = project_ranks(&actives);
        let survivors: u64 = actives.iter().map(|a| a.size).sum();
        prop_assert!(projected.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(projected.iter().all(|&r| r >= 1 && r <= survivors));
    }

    #[test]
    fn redistribution_balances_any_skew(
        seed in 0u64..10_000,
        p in 2usize..9,
        n_seed in 1u64..200,
        bandwidth in 1u64..4,
    ) {
        let n = n_seed;
        let spec = InstanceSpec { n, p, distribution: Distribution::UniformRandom, seed };
        let mut config = CliqueConfig::new(p);
        config.bandwidth = bandwidth;
        let mut st = CliqueState::load_instance(generate(&spec), config).unwrap();
        // Skew: pile everything onto one node chosen by the seed.
        let target = (seed % p as u64) as usize;
        let mut all: Vec<TaggedElement> = Vec::new();
        for node in &mut st.nodes {
            all.append(&mut node.local_set);
        }
        let mut sorted_before = all.clone();
        sorted_before.sort_unstable();
        st.nodes[target].local_set = all;

        redistribute(&mut st).unwrap();

        let sizes = st.node_sizes();
        let max = *sizes.iter().max().unwrap();
        let min = *sizes.iter().min().unwrap();
        prop_assert!(max - min <= 1, "sizes {:?}", sizes);
        let mut sorted_after: Vec<TaggedElement> = st
            .nodes
            .iter()
            .flat_map(|nd| nd.local_set.iter().copied())
            .collect();
        sorted_after.sort_unstable();
        prop_assert_eq!(sorted_before, sorted_after);
    }

    #[test]
    fn log_star_is_monotone_and_shrinks_with_base(
        n in 1u64..=1 << 40,
        base in 2u64..64,
    ) {
        let a = log_star(LogStarMode::Power, base, n);
        let b = log_star(LogStarMode::Power, base, n.saturating_add(1));
        prop_assert!(a <= b);
        let larger_base = log_star(LogStarMode::Power, base + 1, n);
        prop_assert!(larger_base <= a + 1);
        if base >= 3 {
            prop_assert!(log_star(LogStarMode::Power, base, n) <= log_star(LogStarMode::Power, 2, n));
        }
    }
}
