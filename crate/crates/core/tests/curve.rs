use ssvae_core::corpus::{generate_synthetic_corpus, SynthSpec};
use ssvae_core::harness::{aggregate, run_learning_curve, CurveSpec, LabeledCount};
use ssvae_core::networks::ModelDims;
use ssvae_core::numeric::SeededRng;
use ssvae_core::semivae::{Arm, TrainConfig};

fn base() -> TrainConfig {
    TrainConfig {
        dims: ModelDims::tiny(),
        epochs: 2,
        steps_per_epoch: Some(2),
        batch_size: 8,
        validation_count: 20,
        test_count: 20,
        ..Default::default()
    }
}

fn corpus() -> (Vec<ssvae_core::corpus::RelationInstance>, ssvae_core::corpus::LabelSchema) {
    let spec = SynthSpec {
        n_instances: 100,
        ..Default::default()
    };
    (generate_synthetic_corpus(&spec, &mut SeededRng::new(1)), spec.schema())
}

#[test]
fn single_seed_has_zero_spread_and_rows_recompute_from_runs() {
    let (corpus, schema) = corpus();
    let spec = CurveSpec {
        base: base(),
        counts: vec![LabeledCount::Count(10), LabeledCount::Count(30)],
        n_seeds: 1,
        arms: vec![Arm::Supervised, Arm::SemiSupervised],
    };
    let report = run_learning_curve(&spec, &corpus, &schema).unwrap();
    assert_eq!(report.runs.len(), 4);
    assert_eq!(report.rows.len(), 4);
    for row in &report.rows {
        assert_eq!(row.runs, 1);
        assert_eq!(row.std_f1, 0.0);
        assert!((0.0..=1.0).contains(&row.mean_f1));
    }
    assert_eq!(aggregate(&report.runs, &spec.counts, &spec.arms), report.rows);
    assert_eq!(report.runs_tsv().lines().count(), 5);
    assert_eq!(report.summary_tsv().lines().count(), 5);
    assert!(report.to_svg().starts_with("<svg"));
}

#[test]
fn all_labeled_skips_the_semi_supervised_arm_with_a_note() {
    let (corpus, schema) = corpus();
    let spec = CurveSpec {
        base: base(),
        counts: vec![LabeledCount::All],
        n_seeds: 1,
        arms: vec![Arm::Supervised, Arm::SemiSupervised],
    };
    let report = run_learning_curve(&spec, &corpus, &schema).unwrap();
    assert_eq!(report.runs.len(), 1);
    let semi = report.rows.iter().find(|r| r.arm == Arm::SemiSupervised).unwrap();
    assert_eq!(semi.runs, 0);
    assert!(semi.note.is_some());
}

#[test]
fn labeled_count_parses() {
    assert_eq!("all".parse::<LabeledCount>().unwrap(), LabeledCount::All);
    assert_eq!("250".parse::<LabeledCount>().unwrap(), LabeledCount::Count(250));
    assert!("many".parse::<LabeledCount>().is_err());
    assert_eq!(LabeledCount::Count(7).to_string(), "7");
}
