use ssvae_core::corpus::{generate_synthetic_corpus, sample_splits, trigger_oracle, DatasetSplit, LabelSchema, SynthSpec};
use ssvae_core::networks::ModelDims;
use ssvae_core::numeric::{RmsPropConfig, SeededRng};
use ssvae_core::semivae::{predict, train, Arm, TrainConfig};

fn split(trigger_strength: f64, n: usize, labeled: usize) -> (DatasetSplit, LabelSchema) {
    let spec = SynthSpec {
        n_instances: n,
        trigger_strength,
        ..Default::default()
    };
    let corpus = generate_synthetic_corpus(&spec, &mut SeededRng::new(11));
    let split = sample_splits(&corpus, labeled, 100, 200, &mut SeededRng::new(12)).unwrap();
    (split, spec.schema())
}

fn config(arm: Arm, epochs: usize, steps: usize) -> TrainConfig {
    TrainConfig {
        arm,
        dims: ModelDims::small(),
        epochs,
        steps_per_epoch: Some(steps),
        batch_size: 32,
        optimizer: RmsPropConfig {
            lr: 1e-2,
            ..Default::default()
        },
        seed: 5,
        ..Default::default()
    }
}

#[test]
fn one_epoch_one_batch_gives_one_history_entry() {
    let (split, schema) = split(0.9, 400, 40);
    let out = train::<f32>(&config(Arm::SemiSupervised, 1, 1), &split, &schema).unwrap();
    assert_eq!(out.history.len(), 1);
    assert_eq!(out.best_epoch, 0);
    assert!(out.history[0].unlabeled.is_some());
    assert!(out.history[0].validation.is_some());
}

#[test]
fn same_seed_trains_bit_identically() {
    let (split, schema) = split(0.9, 400, 40);
    let c = config(Arm::SemiSupervised, 2, 2);
    let a = train::<f32>(&c, &split, &schema).unwrap();
    let b = train::<f32>(&c, &split, &schema).unwrap();
    assert_eq!(a.model.store.flat_values(), b.model.store.flat_values());
    assert_eq!(a.history, b.history);
}

#[test]
fn supervised_training_learns_the_trigger_rule() {
    let (split, schema) = split(1.0, 1500, 1000);
    let out = train::<f32>(&config(Arm::Supervised, 15, 10), &split, &schema).unwrap();
    let first = out.history.first().unwrap().labeled.total;
    let last = out.history.last().unwrap().labeled.total;
    assert!(last < first, "loss {first} -> {last}");
    let preds = predict(&out.model, &split.test).unwrap();
    let agree = preds
        .iter()
        .zip(&split.test)
        .filter(|(p, i)| **p == trigger_oracle(i))
        .count() as f64
        / preds.len() as f64;
    assert!(agree >= 0.95, "oracle agreement {agree}");
}

#[test]
fn prediction_is_deterministic_and_label_free() {
    let (split, schema) = split(0.9, 400, 40);
    let out = train::<f32>(&config(Arm::Supervised, 1, 1), &split, &schema).unwrap();
    let stripped: Vec<_> = split.test.iter().map(|i| i.without_label()).collect();
    let a = predict(&out.model, &split.test).unwrap();
    assert_eq!(a, predict(&out.model, &stripped).unwrap());
    assert_eq!(a, predict(&out.model, &split.test).unwrap());
}
