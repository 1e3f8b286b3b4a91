//! Property tests over randomized inputs.

use proptest::prelude::*;

use kge_core::eval::Metrics;
use kge_core::geometry;
use kge_core::split::{split, SplitConfig};
use kge_core::synth;
use kge_core::triples::{KgBuilder, Slot, Triple, TypeSource, ViewTag};

fn ball_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d).prop_map(move |v| {
        let n = geometry::norm(&v);
        if n >= 0.95 {
            v.into_iter().map(|x| x * 0.9 / n).collect()
        } else {
            v
        }
    })
}

proptest! {
    #[test]
    fn mobius_left_inverse(x in ball_point(4), y in ball_point(4)) {
        let xy = geometry::mobius_add(1.0, &x, &y);
        let neg_x: Vec<f64> = x.iter().map(|v| -v).collect();
        let back = geometry::mobius_add(1.0, &neg_x, &xy);
        for i in 0..4 {
            prop_assert!((back[i] - y[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn exp_log_round_trip(v in prop::collection::vec(-1.5f64..1.5, 5), c in 0.2f64..5.0) {
        // keep sqrt(c)|v| <= 3: beyond that tanh saturates into the ball
        // projection margin and the round trip is clamped by design
        let n = geometry::norm(&v);
        let limit = 3.0 / c.sqrt();
        let v: Vec<f64> = if n > limit {
            v.iter().map(|x| x * limit / n).collect()
        } else {
            v
        };
        let p = geometry::exp_map_zero(c, &v);
        let back = geometry::log_map_zero(c, &p).unwrap();
        for i in 0..5 {
            prop_assert!((back[i] - v[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn givens_norm_and_involution(
        x in prop::collection::vec(-3.0f64..3.0, 6),
        th in prop::collection::vec(-3.2f64..3.2, 3),
    ) {
        let r = geometry::givens_rotate(&th, &x);
        prop_assert!((geometry::norm(&r) - geometry::norm(&x)).abs() < 1e-12);
        let f = geometry::givens_reflect(&th, &x);
        let ff = geometry::givens_reflect(&th, &f);
        for i in 0..6 {
            prop_assert!((ff[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_bounds(ranks in prop::collection::vec(1usize..500, 1..60)) {
        let m = Metrics::from_ranks(ranks.iter().copied());
        prop_assert!(m.hits1 <= m.hits3 && m.hits3 <= m.hits10);
        prop_assert!(m.mrr > 0.0 && m.mrr <= 1.0);
        prop_assert!(m.mr >= 1.0);
        prop_assert!(m.mrr >= m.hits1 - 1e-12);
        prop_assert!(m.mrr <= m.hits10 + (1.0 / 11.0) * (1.0 - m.hits10) + 1e-12);
    }

    #[test]
    fn split_partitions_random_multigraphs(
        nodes in 12usize..120,
        extra in 0usize..200,
        seed in 0u64..5000,
        fraction in 0.0f64..1.0,
    ) {
        let kg = synth::random_multigraph(nodes, nodes + extra, 3, seed);
        let cfg = SplitConfig { holdout_fraction: fraction, min_component_size: 10, seed };
        let ds = split(&kg, &cfg).unwrap();
        let mut all: Vec<Triple> = ds.train.iter()
            .chain(&ds.valid)
            .chain(&ds.test)
            .chain(&ds.excluded)
            .copied()
            .collect();
        all.sort_unstable();
        prop_assert_eq!(all.as_slice(), kg.triples());
        prop_assert!(ds.valid.len().abs_diff(ds.test.len()) <= 1);
        // spanning trees always land in train
        let train_total: usize = ds.components.iter().map(|c| c.tree_edges).sum();
        prop_assert!(ds.train.len() >= train_total);
    }

    #[test]
    fn vocab_round_trip_arbitrary_labels(labels in prop::collection::hash_set("[A-Za-z]{1,6}:[a-z0-9]{1,8}", 1..40)) {
        let mut b = KgBuilder::new(TypeSource::default());
        let labels: Vec<String> = labels.into_iter().collect();
        for w in labels.windows(2) {
            b.add(&w[0], "r", &w[1], ViewTag::Instance).unwrap();
        }
        if labels.len() >= 2 {
            let kg = b.finish();
            for i in 0..kg.num_entities() as u32 {
                let label = kg.entity_vocab().label(i);
                prop_assert_eq!(kg.entity_vocab().get(label), Some(i));
            }
        }
    }

    #[test]
    fn view_partition_is_exact(seed in 0u64..1000) {
        let kg = synth::random_multigraph(30, 80, 3, seed);
        // random_multigraph tags everything instance, so whole == instance
        let o = kg.view_filter(ViewTag::Ontology).triples().len();
        let i = kg.view_filter(ViewTag::Instance).triples().len();
        let b = kg.view_filter(ViewTag::Bridge).triples().len();
        prop_assert_eq!(o + i + b, kg.triples().len());
    }

    #[test]
    fn candidate_sets_contain_observed_entities(seed in 0u64..300) {
        let kg = synth::random_multigraph(40, 100, 4, seed);
        for t in kg.triples() {
            let heads = kg.candidate_set(t.relation, Slot::Head).unwrap();
            prop_assert!(heads.binary_search(&t.head).is_ok());
            let tails = kg.candidate_set(t.relation, Slot::Tail).unwrap();
            prop_assert!(tails.binary_search(&t.tail).is_ok());
        }
    }
}
