use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ssvae_core::networks::ModelDims;

fn ssvae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssvae"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let config = serde_json::json!({
        "dims": ModelDims::tiny(),
        "epochs": 2,
        "steps_per_epoch": 2,
        "batch_size": 16,
        "labeled_count": 40,
        "validation_count": 30,
        "test_count": 30,
    });
    let path = dir.join("config.json");
    fs::write(&path, config.to_string()).unwrap();
    path
}

#[test]
fn synth_train_eval_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("syn.tsv");
    let o = ssvae(&["synth", "--instances", "200", "--out", p(&corpus)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("syn.tsv.labels").exists());
    assert_eq!(fs::read_to_string(&corpus).unwrap().lines().count(), 200);

    let config = small_config(dir.path());
    let model = dir.path().join("model");
    let o = ssvae(&[
        "train",
        "--labeled-file",
        p(&corpus),
        "--config",
        p(&config),
        "--arm",
        "semi-vae",
        "--out",
        p(&model),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(model.join("manifest.json").exists());
    let history: serde_json::Value = serde_json::from_str(&fs::read_to_string(model.join("history.json")).unwrap()).unwrap();
    assert_eq!(history.as_array().unwrap().len(), 2);

    let o = ssvae(&["eval", "--model", p(&model), "--test-file", p(&corpus)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("micro"));

    let preds = dir.path().join("preds.tsv");
    let o = ssvae(&["predict", "--model", p(&model), "--input", p(&corpus), "--output", p(&preds)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(header.len(), 2 + 3);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 200);
    for row in rows {
        let probs: f64 = row.split('\t').skip(2).map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((probs - 1.0).abs() < 1e-3);
    }

    let labels = dir.path().join("other.labels");
    fs::write(&labels, "negative=negative\npositive\nnegative\n").unwrap();
    let o = ssvae(&["eval", "--model", p(&model), "--test-file", p(&corpus), "--labels", p(&labels)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("schema"), "{}", stderr(&o));
}

#[test]
fn gradcheck_exits_zero() {
    let o = ssvae(&["gradcheck"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn unknown_flag_is_rejected() {
    let o = ssvae(&["train", "--no-such-flag"]);
    assert!(!o.status.success());
    let o = ssvae(&["synth", "--classes", "1", "--out", "/nonexistent/x"]);
    assert!(!o.status.success());
}
