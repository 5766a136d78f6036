use proptest::prelude::*;

use ssvae_core::corpus::{
    clamped_distance, parse_corpus_str, position_index, relative_positions, sample_splits, serialize_corpus,
    window_positions, LabelSchema, RelationInstance, WINDOW_LEN,
};
use ssvae_core::harness::evaluate;
use ssvae_core::numeric::{kl_gaussian_value, Graph, ParamStore, SeededRng, Tensor};

fn instance() -> impl Strategy<Value = RelationInstance> {
    (2usize..60)
        .prop_flat_map(|n| (Just(n), 0..n - 1))
        .prop_flat_map(|(n, e0)| (Just(n), Just(e0), e0 + 1..n, 0usize..4, any::<u8>()))
        .prop_map(|(n, e0, e1, label, salt)| {
            let mut tokens: Vec<String> = (0..n).map(|i| format!("w{}", (i * 7 + salt as usize) % 23)).collect();
            tokens[e0] = "E0".into();
            tokens[e1] = "E1".into();
            RelationInstance {
                id: format!("p{salt}_{n}_{e0}_{e1}"),
                tokens,
                e0_index: e0,
                e1_index: e1,
                label: Some(label),
            }
        })
}

/// Per-class and micro counts by direct enumeration of the confusion matrix.
fn brute_micro_f1(preds: &[usize], gold: &[usize], k: usize, negative: usize) -> f64 {
    let mut m = vec![vec![0usize; k]; k];
    for (&p, &g) in preds.iter().zip(gold) {
        m[g][p] += 1;
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for c in (0..k).filter(|&c| c != negative) {
        tp += m[c][c];
        fp += (0..k).filter(|&g| g != c).map(|g| m[g][c]).sum::<usize>();
        fn_ += (0..k).filter(|&p| p != c).map(|p| m[c][p]).sum::<usize>();
    }
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    2.0 * p * r / (p + r)
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(xs in prop::collection::vec(-500.0f64..500.0, 1..20)) {
        let store = ParamStore::<f64>::new();
        let mut g = Graph::new(&store);
        let x = g.constant(Tensor::vector(xs));
        let p = g.softmax(x);
        let v = g.value(p).data();
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(v.iter().all(|&q| (0.0..=1.0).contains(&q)));
    }

    #[test]
    fn kl_is_nonnegative(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..16)) {
        let (mu, lv): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assert!(kl_gaussian_value(&mu, &lv) >= 0.0);
    }

    #[test]
    fn window_is_thirty_long_and_skips_entities(inst in instance()) {
        let w = window_positions(&inst);
        prop_assert_eq!(w.len(), WINDOW_LEN);
        for p in w.iter().flatten() {
            prop_assert!(*p < inst.len());
        }
        prop_assert!(w[..10].iter().flatten().all(|&p| p < inst.e0_index));
        prop_assert!(w[20..].iter().flatten().all(|&p| p > inst.e1_index));
    }

    #[test]
    fn relative_positions_stay_in_table(inst in instance(), max_dist in 1usize..60) {
        let (d0, d1) = relative_positions(&inst, max_dist);
        prop_assert_eq!(d0.len(), inst.len());
        for &d in d0.iter().chain(&d1) {
            prop_assert!(d <= 2 * max_dist);
        }
        prop_assert_eq!(d0[inst.e0_index], max_dist);
        prop_assert_eq!(d1[inst.e1_index], max_dist);
        prop_assert_eq!(position_index(clamped_distance(0, 0, max_dist), max_dist), max_dist);
    }

    #[test]
    fn serialize_then_parse_is_identity(insts in prop::collection::vec(instance(), 1..8)) {
        let schema = LabelSchema::synthetic(4);
        let mut insts = insts;
        for (i, inst) in insts.iter_mut().enumerate() {
            inst.id = format!("s{i}");
            if i % 3 == 0 {
                inst.label = None;
            }
        }
        let text = serialize_corpus(&insts, &schema);
        prop_assert_eq!(parse_corpus_str(&text, &schema).unwrap(), insts);
    }

    #[test]
    fn splits_are_disjoint(n in 10usize..80, seed in any::<u64>()) {
        let corpus: Vec<RelationInstance> = (0..n)
            .map(|i| RelationInstance {
                id: format!("i{i}"),
                tokens: vec!["E0".into(), "E1".into()],
                e0_index: 0,
                e1_index: 1,
                label: Some(i % 2),
            })
            .collect();
        let (l, v, t) = (n / 4, n / 5, n / 6);
        let s = sample_splits(&corpus, l, v, t, &mut SeededRng::new(seed)).unwrap();
        let mut ids: Vec<&str> = s.labeled.iter().chain(&s.unlabeled).chain(&s.validation).chain(&s.test).map(|i| i.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
    }

    #[test]
    fn micro_f1_matches_brute_force_and_ignores_order(
        pairs in prop::collection::vec((0usize..6, 0usize..6), 1..200),
        seed in any::<u64>(),
    ) {
        let schema = LabelSchema::synthetic(6);
        let (preds, gold): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let m = evaluate(&preds, &gold, &schema).unwrap();
        let brute = brute_micro_f1(&preds, &gold, 6, schema.negative);
        prop_assert!((m.micro_f1 - brute).abs() < 1e-12);
        let order = SeededRng::new(seed).permutation(pairs.len());
        let p2: Vec<usize> = order.iter().map(|&i| preds[i]).collect();
        let g2: Vec<usize> = order.iter().map(|&i| gold[i]).collect();
        prop_assert!((evaluate(&p2, &g2, &schema).unwrap().micro_f1 - m.micro_f1).abs() < 1e-15);
    }
}
