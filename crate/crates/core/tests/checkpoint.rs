use std::fs;

use ssvae_core::harness::gradcheck::tiny_model;
use ssvae_core::harness::checkpoint::{MANIFEST_FILE, PAYLOAD_FILE};
use ssvae_core::harness::{load_checkpoint, read_manifest, save_checkpoint};
use ssvae_core::semivae::TrainConfig;
use ssvae_core::Error;

fn saved() -> (tempfile::TempDir, ssvae_core::networks::Model<f32>, Vec<ssvae_core::corpus::RelationInstance>) {
    let (model, instances) = tiny_model(3);
    let model = model.cast::<f32>();
    let dir = tempfile::tempdir().unwrap();
    let config = TrainConfig {
        seed: 3,
        alpha: 0.3,
        ..Default::default()
    };
    save_checkpoint(&model, &config, dir.path()).unwrap();
    (dir, model, instances)
}

#[test]
fn round_trip_reproduces_predictions_and_probabilities() {
    let (dir, model, instances) = saved();
    let (loaded, config) = load_checkpoint(dir.path()).unwrap();
    assert_eq!(config.alpha, 0.3);
    assert_eq!(loaded.dims, model.dims);
    assert_eq!(loaded.store.flat_values(), model.store.flat_values());
    assert_eq!(loaded.predict(&instances).unwrap(), model.predict(&instances).unwrap());
    for inst in &instances {
        assert_eq!(loaded.class_probs(inst).unwrap(), model.class_probs(inst).unwrap());
    }
}

#[test]
fn truncated_payload_is_corrupt() {
    let (dir, _, _) = saved();
    let path = dir.path().join(PAYLOAD_FILE);
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
    assert!(matches!(load_checkpoint(dir.path()), Err(Error::CorruptCheckpoint(_))));
}

#[test]
fn edited_shape_names_the_parameter() {
    let (dir, _, _) = saved();
    let path = dir.path().join(MANIFEST_FILE);
    let mut manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let entry = manifest["params"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|e| e["name"] == "classifier.out.W")
        .unwrap();
    entry["shape"] = serde_json::json!([2, 2]);
    fs::write(&path, manifest.to_string()).unwrap();
    match load_checkpoint(dir.path()) {
        Err(Error::ParamShape { name, .. }) => assert_eq!(name, "classifier.out.W"),
        other => panic!("expected a shape error, got {other:?}"),
    }
}

#[test]
fn version_mismatch_is_reported_before_anything_else() {
    let (dir, _, _) = saved();
    let path = dir.path().join(MANIFEST_FILE);
    fs::write(&path, r#"{"version": 99, "garbage": true}"#).unwrap();
    assert!(matches!(
        read_manifest(dir.path()),
        Err(Error::VersionMismatch { found: 99, expected: 1 })
    ));
    fs::write(&path, "not json").unwrap();
    assert!(matches!(load_checkpoint(dir.path()), Err(Error::CorruptCheckpoint(_))));
}
