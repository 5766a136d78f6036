//! Command-line front end: synthesise corpora, train, evaluate, predict,
//! sweep learning curves and run the gradient checks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ssvae_core::corpus::{
    generate_synthetic_corpus, infer_schema, parse_corpus, sample_splits, write_corpus, DatasetSplit, LabelSchema,
    RelationInstance, SynthSpec,
};
use ssvae_core::harness::gradcheck::{run_all, GradCheckConfig};
use ssvae_core::harness::{
    evaluate, load_checkpoint, run_learning_curve, save_checkpoint, CurveSpec, LabeledCount, Metrics,
};
use ssvae_core::numeric::SeededRng;
use ssvae_core::semivae::{train, Arm, TrainConfig};
use ssvae_core::Error;

#[derive(Parser)]
#[command(name = "ssvae", version, about = "Semi-supervised relation classification with a conditional VAE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint directory.
    Train(TrainArgs),
    /// Score a checkpoint on a labeled file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test_file: PathBuf,
        /// Label file of the test data; must match the model's schema.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Write predicted labels and class probabilities for every instance.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Learning curve of both arms over labeled counts and seeds.
    Curve {
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated labeled counts; `all` labels everything outside validation and test.
        #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000,all")]
        counts: Vec<String>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output prefix: `<out>.tsv`, `<out>.summary.tsv`, `<out>.svg`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus and its label file (`<out>.labels`).
    Synth {
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 5000)]
        instances: usize,
        #[arg(long, default_value_t = 0.9)]
        trigger_strength: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference gradient checks; exit status 0 iff all pass.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    labeled_file: PathBuf,
    #[arg(long)]
    unlabeled_file: Option<PathBuf>,
    #[arg(long)]
    val_file: Option<PathBuf>,
    #[arg(long)]
    test_file: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Pretrained word vectors (`token v1 … vd` per line).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// JSON training configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep this many labeled instances; the other labeled ones become unlabeled.
    #[arg(long)]
    labeled_count: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_parser = parse_arm)]
    arm: Option<Arm>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_arm(s: &str) -> Result<Arm, String> {
    match s {
        "semi-vae" | "semi" => Ok(Arm::SemiSupervised),
        "supervised" | "sup" => Ok(Arm::Supervised),
        _ => Err(format!("unknown arm '{s}' (expected semi-vae or supervised)")),
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels");
    PathBuf::from(s)
}

/// Explicit label file, else `<file>.labels`, else inferred from the file.
fn resolve_schema(labels: Option<&Path>, data: &Path) -> Result<LabelSchema> {
    if let Some(p) = labels {
        return LabelSchema::load(p).with_context(|| format!("reading label file {}", p.display()));
    }
    let side = sidecar(data);
    if side.exists() {
        return Ok(LabelSchema::load(&side)?);
    }
    let text = fs::read_to_string(data).with_context(|| format!("reading {}", data.display()))?;
    Ok(infer_schema(&text)?)
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
        None => Ok(TrainConfig::default()),
    }
}

fn read(path: &Path, schema: &LabelSchema) -> Result<Vec<RelationInstance>> {
    parse_corpus(path, schema).with_context(|| format!("reading corpus {}", path.display()))
}

fn print_metrics(m: &Metrics, schema: &LabelSchema) {
    println!("class\tprecision\trecall\tf1\ttp\tfp\tfn");
    for (i, (p, c)) in m.per_class.iter().zip(&m.counts).enumerate() {
        println!(
            "{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}",
            schema.name(i),
            p.precision,
            p.recall,
            p.f1,
            c.tp,
            c.fp,
            c.fn_
        );
    }
    println!(
        "micro (excluding {})\t{:.4}\t{:.4}\t{:.4}",
        schema.name(m.negative),
        m.micro_precision,
        m.micro_recall,
        m.micro_f1
    );
}

fn gold(instances: &[RelationInstance]) -> Result<Vec<usize>> {
    instances
        .iter()
        .map(|i| i.label.with_context(|| format!("instance {} has no gold label", i.id)))
        .collect()
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let schema = resolve_schema(args.labels.as_deref(), &args.labeled_file)?;
    let mut config = load_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(a) = args.alpha {
        config.alpha = a;
    }
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    if let Some(a) = args.arm {
        config.arm = a;
    }
    if args.embeddings.is_some() {
        config.embeddings = args.embeddings.clone();
    }
    let all = read(&args.labeled_file, &schema)?;
    let (pool, mut unlabeled): (Vec<_>, Vec<_>) = all.into_iter().partition(|i| i.label.is_some());
    if let Some(p) = &args.unlabeled_file {
        unlabeled.extend(read(p, &schema)?.into_iter().map(|i| i.without_label()));
    }
    let validation = args.val_file.as_deref().map(|p| read(p, &schema)).transpose()?;
    let test = args.test_file.as_deref().map(|p| read(p, &schema)).transpose()?;
    let val_count = if validation.is_some() { 0 } else { config.validation_count.min(pool.len() / 5) };
    let test_count = if test.is_some() { 0 } else { config.test_count.min(pool.len() / 5) };
    let labeled_count = args
        .labeled_count
        .unwrap_or_else(|| pool.len().saturating_sub(val_count + test_count));
    let mut split = sample_splits(
        &pool,
        labeled_count,
        val_count,
        test_count,
        &mut SeededRng::new(config.seed).fork(0x5b1),
    )?;
    split.unlabeled.extend(unlabeled);
    if let Some(v) = validation {
        split.validation = v;
    }
    if let Some(t) = test {
        split.test = t;
    }
    config.labeled_count = split.labeled.len();
    report_split(&split);
    let outcome = train::<f32>(&config, &split, &schema)?;
    for rec in &outcome.history {
        let val = rec.validation.as_ref().map_or("-".to_string(), |m| format!("{:.4}", m.micro_f1));
        let unl = rec.unlabeled.map_or("-".to_string(), |u| format!("{:.3}", u.total));
        println!(
            "epoch {:>3}  labeled loss {:.3}  unlabeled loss {}  validation micro-F1 {}",
            rec.epoch + 1,
            rec.labeled.total,
            unl,
            val
        );
    }
    println!("kept parameters of epoch {}", outcome.best_epoch + 1);
    save_checkpoint(&outcome.model, &config, &args.out)?;
    fs::write(args.out.join("history.json"), serde_json::to_string_pretty(&outcome.history)?)?;
    if !split.test.is_empty() {
        let preds = outcome.model.predict(&split.test)?;
        let m = evaluate(&preds, &gold(&split.test)?, &schema)?;
        println!("test set ({} instances):", split.test.len());
        print_metrics(&m, &schema);
    }
    println!("checkpoint written to {}", args.out.display());
    Ok(())
}

fn report_split(split: &DatasetSplit) {
    println!(
        "labeled {}  unlabeled {}  validation {}  test {}",
        split.labeled.len(),
        split.unlabeled.len(),
        split.validation.len(),
        split.test.len()
    );
}

fn cmd_eval(model: &Path, test_file: &Path, labels: Option<&Path>) -> Result<()> {
    let (model, _) = load_checkpoint(model).with_context(|| format!("loading checkpoint {}", model.display()))?;
    let file_schema = match labels {
        Some(p) => Some(LabelSchema::load(p)?),
        None => {
            let side = sidecar(test_file);
            side.exists().then(|| LabelSchema::load(&side)).transpose()?
        }
    };
    if let Some(s) = file_schema {
        if s != model.schema {
            return Err(Error::SchemaMismatch(format!(
                "model classes {:?} (negative {}) differ from test classes {:?} (negative {})",
                model.schema.classes,
                model.schema.classes[model.schema.negative],
                s.classes,
                s.classes[s.negative]
            ))
            .into());
        }
    }
    let instances = read(test_file, &model.schema)?;
    let preds = model.predict(&instances)?;
    let m = evaluate(&preds, &gold(&instances)?, &model.schema)?;
    print_metrics(&m, &model.schema);
    Ok(())
}

fn cmd_predict(model: &Path, input: &Path, output: &Path) -> Result<()> {
    let (model, _) = load_checkpoint(model).with_context(|| format!("loading checkpoint {}", model.display()))?;
    let instances = read(input, &model.schema)?;
    let mut out = String::from("id\tprediction");
    for c in &model.schema.classes {
        out.push_str(&format!("\tp_{c}"));
    }
    out.push('\n');
    for inst in &instances {
        let probs = model.class_probs(inst)?;
        let best = ssvae_core::numeric::Tensor::vector(probs.clone()).argmax();
        out.push_str(&format!("{}\t{}", inst.id, model.schema.name(best)));
        for p in probs {
            out.push_str(&format!("\t{p:.6}"));
        }
        out.push('\n');
    }
    fs::write(output, out)?;
    println!("wrote {} predictions to {}", instances.len(), output.display());
    Ok(())
}

fn cmd_curve(
    corpus: &Path,
    counts: &[String],
    seeds: usize,
    labels: Option<&Path>,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let schema = resolve_schema(labels, corpus)?;
    let instances = read(corpus, &schema)?;
    let counts = counts
        .iter()
        .map(|c| c.parse::<LabeledCount>())
        .collect::<Result<Vec<_>, _>>()?;
    let spec = CurveSpec {
        base: load_config(config)?,
        counts,
        n_seeds: seeds,
        arms: vec![Arm::Supervised, Arm::SemiSupervised],
    };
    let report = run_learning_curve(&spec, &instances, &schema)?;
    let with_ext = |ext: &str| {
        let mut s = out.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    fs::write(with_ext(".tsv"), report.runs_tsv())?;
    fs::write(with_ext(".summary.tsv"), report.summary_tsv())?;
    fs::write(with_ext(".svg"), report.to_svg())?;
    print!("{}", report.summary_tsv());
    Ok(())
}

fn cmd_synth(classes: usize, instances: usize, trigger_strength: f64, seed: u64, out: &Path) -> Result<()> {
    if classes < 2 {
        bail!("--classes must be at least 2 (negative plus one relation)");
    }
    if !(0.0..=1.0).contains(&trigger_strength) {
        bail!("--trigger-strength must lie in [0, 1]");
    }
    let spec = SynthSpec {
        n_classes: classes,
        n_instances: instances,
        trigger_strength,
        ..SynthSpec::default()
    };
    let corpus = generate_synthetic_corpus(&spec, &mut SeededRng::new(seed));
    let schema = spec.schema();
    write_corpus(out, &corpus, &schema)?;
    fs::write(sidecar(out), schema.to_file_string())?;
    println!("wrote {instances} instances to {} (labels in {})", out.display(), sidecar(out).display());
    Ok(())
}

fn cmd_gradcheck(seed: u64) -> Result<bool> {
    let results = run_all(GradCheckConfig::default(), seed)?;
    let mut ok = true;
    for r in &results {
        ok &= r.passed;
        println!(
            "{}\t{:<18}\tentries {:>5}\tmax rel err {:.3e}\tworst {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.entries,
            r.max_rel_err,
            r.worst
        );
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train(args) => cmd_train(args)?,
        Command::Eval { model, test_file, labels } => cmd_eval(&model, &test_file, labels.as_deref())?,
        Command::Predict { model, input, output } => cmd_predict(&model, &input, &output)?,
        Command::Curve {
            corpus,
            counts,
            seeds,
            labels,
            config,
            out,
        } => cmd_curve(&corpus, &counts, seeds, labels.as_deref(), config.as_deref(), &out)?,
        Command::Synth {
            classes,
            instances,
            trigger_strength,
            seed,
            out,
        } => cmd_synth(classes, instances, trigger_strength, seed, &out)?,
        Command::Gradcheck { seed } => return cmd_gradcheck(seed),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
