//! Property tests for the library invariants.

mod common;

use std::sync::Arc;

use muse::difftape::{PairIndex, ParamStore, Tape, Tensor};
use muse::metrics::{auc, f1_binary};
use muse::model::{aggregate_order, attention_weights, AttentionParams, Muse, EMBEDDING};
use muse::objective::{sign_loss, structure_loss, total_loss, ObjectiveConfig};
use muse::sgraph::{split_edges, NeighborClass, Sign, SignedEdge};
use muse::trainer::init_params;
use proptest::prelude::*;

fn graph_strategy() -> impl Strategy<Value = (usize, f64, u64)> {
    (3usize..30, 0.05f64..0.5, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjacency_is_symmetric((n, p, seed) in graph_strategy()) {
        let g = common::random_graph(n, p, seed);
        for i in 0..n {
            for &(j, s) in g.neighbors(i) {
                prop_assert_eq!(g.sign(j, i), Some(s));
            }
        }
    }

    #[test]
    fn order_one_partitions_adjacency((n, p, seed) in graph_strategy()) {
        let g = common::random_graph(n, p, seed);
        let sets = common::sets(&g, 1);
        for i in 0..n {
            let pos: Vec<usize> = g.neighbors(i).iter().filter(|(_, s)| s.is_positive()).map(|&(j, _)| j).collect();
            let neg: Vec<usize> = g.neighbors(i).iter().filter(|(_, s)| !s.is_positive()).map(|&(j, _)| j).collect();
            prop_assert_eq!(sets.balanced(i, 1), &pos[..]);
            prop_assert_eq!(sets.unbalanced(i, 1), &neg[..]);
        }
    }

    #[test]
    fn split_is_a_stratified_partition((n, seed) in (12usize..30, any::<u64>()), frac in 0.1f64..0.9) {
        let g = common::random_graph(n, 0.4, seed);
        prop_assume!(g.n_positive() >= 2 && g.n_negative() >= 2);
        let split = split_edges(&g, frac, seed).unwrap();
        prop_assert_eq!(&split, &split_edges(&g, frac, seed).unwrap());
        for sign in [Sign::Positive, Sign::Negative] {
            let total = g.edges().iter().filter(|e| e.sign == sign).count();
            let train = split.train.iter().filter(|e| e.sign == sign).count();
            prop_assert_eq!(train, (frac * total as f64).round() as usize);
        }
        let mut all: Vec<SignedEdge> = split.train.iter().chain(&split.test).copied().collect();
        all.sort_by_key(|e| (e.src, e.dst));
        let mut want = g.edges();
        want.sort_by_key(|e| (e.src, e.dst));
        prop_assert_eq!(all, want);
    }

    #[test]
    fn softmax_rows_are_distributions(data in prop::collection::vec(-30.0f64..30.0, 12)) {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::new(3, 4, data).unwrap());
        let s = tape.softmax(x);
        for r in 0..3 {
            let row = tape.value(s).row(r);
            prop_assert!(row.iter().all(|&p| p > 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn reuse_accumulates_like_single_use_rewrite(data in prop::collection::vec(-3.0f64..3.0, 6)) {
        let w = Tensor::new(2, 3, data).unwrap();
        let mut twice = ParamStore::new();
        twice.insert("w", w.clone());
        let mut tape = Tape::new();
        let a = tape.param(&twice, "w").unwrap();
        let b = tape.param(&twice, "w").unwrap();
        let p = tape.mul(a, b).unwrap();
        let l = tape.reduce_sum(p);
        tape.backward(l, &mut twice).unwrap();

        // sum(w ⊙ w) = sum(w ⊙ c) + sum(c ⊙ w) with c a frozen copy.
        let mut once = ParamStore::new();
        once.insert("w", w.clone());
        let mut tape = Tape::new();
        let a = tape.param(&once, "w").unwrap();
        let c = tape.constant(w.clone());
        let left = tape.mul(a, c).unwrap();
        let left = tape.reduce_sum(left);
        let right = tape.scale(left, 2.0);
        tape.backward(right, &mut once).unwrap();
        prop_assert_eq!(twice.grad("w").unwrap(), once.grad("w").unwrap());
    }

    #[test]
    fn attention_weights_are_a_distribution(
        m in prop::sample::select(vec![1usize, 2, 3, 5]),
        d in 1usize..5,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |r, c| Tensor::from_fn(r, c, |_, _| rng.random_range(-3.0..3.0));
        let params = AttentionParams { transform: draw(d, d), vector: draw(2 * d, 1) };
        let alpha = attention_weights(&draw(m, d), &draw(m, d), &params, 0.2).unwrap();
        prop_assert!((alpha.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(alpha.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn empty_neighborhood_is_identity((n, p, seed) in graph_strategy()) {
        let g = common::random_graph(n, p, seed);
        let cfg = common::small_config(2, 2, 2);
        let sets = common::sets(&g, 2);
        let store: ParamStore<f64> = init_params(g.ids(), &cfg, seed);
        let initial = store.value(EMBEDDING).unwrap();
        for l in 1..=2 {
            for class in NeighborClass::BOTH {
                let params = AttentionParams::from_store(&store, &cfg, l, class).unwrap();
                for i in (0..n).filter(|&i| sets.get(i, l, class).is_empty()) {
                    let prev: Vec<f64> = initial.row(i).iter().map(|x| x * 0.5 + 0.1).collect();
                    let out = aggregate_order(i, l, class, &sets, initial, &prev, &params, &cfg).unwrap();
                    prop_assert_eq!(out, prev);
                }
            }
        }
        // The fused op leaves such rows exactly zero.
        let pairs = Arc::new(sets.pair_index(1, NeighborClass::Balanced));
        let mut tape = Tape::<f64>::new();
        let u = tape.constant(Tensor::ones(n, 2));
        let v = tape.constant(Tensor::ones(n, 2));
        let x = tape.constant(initial.clone());
        let out = tape.facet_attention(u, v, x, pairs, 0.2).unwrap();
        for i in (0..n).filter(|&i| sets.balanced(i, 1).is_empty()) {
            prop_assert!(tape.value(out).row(i).iter().all(|&z| z == 0.0));
        }
    }

    #[test]
    fn embeddings_stay_inside_unit_box((n, p, seed) in graph_strategy()) {
        let g = common::random_graph(n, p, seed);
        let cfg = common::small_config(3, 4, 2);
        let store: ParamStore<f64> = init_params(g.ids(), &cfg, seed);
        let emb = Muse::new(cfg, &common::sets(&g, 2)).unwrap().embed(&store).unwrap();
        prop_assert!(emb.data().iter().all(|x| x.abs() < 1.0));
    }

    #[test]
    fn sign_loss_is_non_negative(pairs in prop::collection::vec((1e-6f64..1.0 - 1e-6, prop::bool::ANY), 1..50)) {
        let pairs: Vec<(f64, f64)> = pairs.into_iter().map(|(p, y)| (p, if y { 1.0 } else { 0.0 })).collect();
        prop_assert!(sign_loss(&pairs).unwrap() >= 0.0);
    }

    #[test]
    fn pulling_a_positive_pair_closer_lowers_structure_loss(
        data in prop::collection::vec(-1.0f64..1.0, 12),
        t in 0.01f64..1.0,
    ) {
        let emb = Tensor::new(4, 3, data.clone()).unwrap();
        let pos = [SignedEdge::new(0, 1, Sign::Positive), SignedEdge::new(2, 3, Sign::Positive)];
        let neg = [SignedEdge::new(0, 2, Sign::Negative)];
        let before = structure_loss(&emb, &pos, &neg).unwrap();
        // Move node 3 toward node 2.
        let mut moved = data.clone();
        for c in 0..3 {
            moved[9 + c] += t * (moved[6 + c] - moved[9 + c]);
        }
        let after = structure_loss(&Tensor::new(4, 3, moved.clone()).unwrap(), &pos, &neg).unwrap();
        let gap: f64 = (0..3).map(|c| (data[6 + c] - data[9 + c]).powi(2)).sum();
        prop_assume!(gap > 1e-9);
        prop_assert!(after < before);
    }

    #[test]
    fn total_loss_is_affine_in_lambda(st in -10.0f64..10.0, sn in 0.0f64..5.0, l in 0.0f64..10.0) {
        let f = |lambda| total_loss(st, sn, &ObjectiveConfig { lambda });
        let (a, b, c) = (f(0.0), f(l), f(2.0 * l));
        prop_assert!((b - a - (c - b)).abs() <= 1e-12 * (1.0 + c.abs()));
        prop_assert!((b - (st + l * sn)).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn auc_ignores_monotone_transforms(
        scores in prop::collection::vec(-5.0f64..5.0, 2..60),
        labels_seed in any::<u64>(),
    ) {
        let labels: Vec<bool> = (0..scores.len()).map(|k| (labels_seed >> (k % 64)) & 1 == 1).collect();
        prop_assume!(labels.iter().any(|&y| y) && labels.iter().any(|&y| !y));
        let base = auc(&scores, &labels).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|&s| (s / 3.0).tanh() * 7.0 + 2.0).collect();
        let exp: Vec<f64> = scores.iter().map(|&s| s.exp()).collect();
        prop_assert_eq!(base, auc(&squashed, &labels).unwrap());
        prop_assert_eq!(base, auc(&exp, &labels).unwrap());
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn flipping_labels_complements_auc(
        scores in prop::collection::hash_set(-1_000_000i64..1_000_000, 2..60),
        labels_seed in any::<u64>(),
    ) {
        let scores: Vec<f64> = scores.into_iter().map(|s| s as f64 / 1000.0).collect();
        let labels: Vec<bool> = (0..scores.len()).map(|k| (labels_seed >> (k % 64)) & 1 == 1).collect();
        prop_assume!(labels.iter().any(|&y| y) && labels.iter().any(|&y| !y));
        let flipped: Vec<bool> = labels.iter().map(|y| !y).collect();
        let a = auc(&scores, &labels).unwrap();
        let b = auc(&scores, &flipped).unwrap();
        prop_assert!((a + b - 1.0).abs() <= 1e-12);
        let (f1, _) = f1_binary(&scores, &labels, 0.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&f1));
    }
}

#[test]
fn fused_op_rejects_mismatched_pairs() {
    let pairs = Arc::new(PairIndex::from_lists(2, &[vec![0, 1]]));
    let mut tape = Tape::<f64>::new();
    let u = tape.constant(Tensor::ones(2, 2));
    let v = tape.constant(Tensor::ones(2, 2));
    let x = tape.constant(Tensor::ones(2, 4));
    assert!(tape.facet_attention(u, v, x, pairs, 0.2).is_err());
}
