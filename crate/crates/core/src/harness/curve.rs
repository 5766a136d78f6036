//! Learning-curve sweeps: both arms over labeled counts and seeds, paired on
//! identical splits, with per-run logs, aggregate rows and a static plot.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{sample_splits, LabelSchema, RelationInstance};
use crate::error::{Error, Result};
use crate::harness::metrics::Prf;
use crate::numeric::SeededRng;
use crate::semivae::{evaluate_model, train, Arm, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabeledCount {
    Count(usize),
    /// Every instance outside validation and test is labeled.
    All,
}

impl FromStr for LabeledCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Self::All);
        }
        s.trim()
            .parse()
            .map(Self::Count)
            .map_err(|_| Error::Config(format!("labeled count must be an integer or 'all', got '{s}'")))
    }
}

impl std::fmt::Display for LabeledCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Count(n) => write!(f, "{n}"),
            Self::All => f.write_str("all"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRun {
    pub labeled_count: LabeledCount,
    pub arm: Arm,
    pub seed: u64,
    pub test: Prf,
    pub best_epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub labeled_count: LabeledCount,
    pub arm: Arm,
    pub runs: usize,
    pub mean_f1: f64,
    /// Sample standard deviation over seeds (0 for a single run).
    pub std_f1: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    /// Why the arm has no runs at this count.
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub runs: Vec<CurveRun>,
    pub rows: Vec<CurveRow>,
}

#[derive(Clone, Debug)]
pub struct CurveSpec {
    pub base: TrainConfig,
    pub counts: Vec<LabeledCount>,
    pub n_seeds: usize,
    pub arms: Vec<Arm>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Run every (count, seed, arm) combination; both arms of a (count, seed)
/// pair share the same split and initial seed.
pub fn run_learning_curve(spec: &CurveSpec, corpus: &[RelationInstance], schema: &LabelSchema) -> Result<CurveReport> {
    let held_out = spec.base.validation_count + spec.base.test_count;
    if held_out >= corpus.len() {
        return Err(Error::SplitTooLarge {
            requested: held_out,
            available: corpus.len(),
        });
    }
    let mut jobs = Vec::new();
    for &count in &spec.counts {
        let n = match count {
            LabeledCount::Count(n) => n,
            LabeledCount::All => corpus.len() - held_out,
        };
        if n + held_out > corpus.len() {
            return Err(Error::SplitTooLarge {
                requested: n + held_out,
                available: corpus.len(),
            });
        }
        for s in 0..spec.n_seeds as u64 {
            for &arm in &spec.arms {
                if arm == Arm::SemiSupervised && n + held_out == corpus.len() {
                    continue;
                }
                jobs.push((count, n, spec.base.seed + s, arm));
            }
        }
    }
    let runs: Vec<CurveRun> = jobs
        .par_iter()
        .map(|&(count, n, seed, arm)| {
            let split = sample_splits(
                corpus,
                n,
                spec.base.validation_count,
                spec.base.test_count,
                &mut SeededRng::new(seed).fork(0x5b1),
            )?;
            let config = TrainConfig {
                arm,
                seed,
                labeled_count: n,
                ..spec.base.clone()
            };
            let outcome = train::<f32>(&config, &split, schema)?;
            let m = evaluate_model(&outcome.model, &split.test)?;
            Ok(CurveRun {
                labeled_count: count,
                arm,
                seed,
                test: Prf {
                    precision: m.micro_precision,
                    recall: m.micro_recall,
                    f1: m.micro_f1,
                },
                best_epoch: outcome.best_epoch,
            })
        })
        .collect::<Result<_>>()?;
    let rows = aggregate(&runs, &spec.counts, &spec.arms);
    Ok(CurveReport { runs, rows })
}

/// Mean/std rows per (count, arm) in sweep order, recomputed from `runs`.
pub fn aggregate(runs: &[CurveRun], counts: &[LabeledCount], arms: &[Arm]) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for &count in counts {
        for &arm in arms {
            let sel: Vec<&CurveRun> = runs.iter().filter(|r| r.labeled_count == count && r.arm == arm).collect();
            let f1s: Vec<f64> = sel.iter().map(|r| r.test.f1).collect();
            let (mean_f1, std_f1) = mean_std(&f1s);
            let p: Vec<f64> = sel.iter().map(|r| r.test.precision).collect();
            let r: Vec<f64> = sel.iter().map(|r| r.test.recall).collect();
            rows.push(CurveRow {
                labeled_count: count,
                arm,
                runs: sel.len(),
                mean_f1,
                std_f1,
                mean_precision: mean_std(&p).0,
                mean_recall: mean_std(&r).0,
                note: sel.is_empty().then(|| "skipped: no unlabeled data remains".to_string()),
            });
        }
    }
    rows
}

impl CurveReport {
    /// Per-run log: `labeled_count arm seed precision recall f1`.
    pub fn runs_tsv(&self) -> String {
        let mut out = String::from("labeled_count\tarm\tseed\tprecision\trecall\tf1\n");
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
                r.labeled_count,
                r.arm.name(),
                r.seed,
                r.test.precision,
                r.test.recall,
                r.test.f1
            );
        }
        out
    }

    /// Aggregate rows, the plot data.
    pub fn summary_tsv(&self) -> String {
        let mut out = String::from("labeled_count\tarm\truns\tmean_f1\tstd_f1\tmean_precision\tmean_recall\tnote\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}",
                r.labeled_count,
                r.arm.name(),
                r.runs,
                r.mean_f1,
                r.std_f1,
                r.mean_precision,
                r.mean_recall,
                r.note.as_deref().unwrap_or("-")
            );
        }
        out
    }

    /// Mean F1 (± one std) against labeled count, one polyline per arm.
    pub fn to_svg(&self) -> String {
        let (w, h, m) = (640.0, 400.0, 60.0);
        let counts: Vec<LabeledCount> = {
            let mut c: Vec<LabeledCount> = Vec::new();
            for r in &self.rows {
                if !c.contains(&r.labeled_count) {
                    c.push(r.labeled_count);
                }
            }
            c
        };
        let x_of = |i: usize| m + (w - 2.0 * m) * if counts.len() > 1 { i as f64 / (counts.len() - 1) as f64 } else { 0.5 };
        let y_of = |f: f64| h - m - (h - 2.0 * m) * f.clamp(0.0, 1.0);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <line x1=\"{m}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
             <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{}\" stroke=\"black\"/>\n",
            h - m,
            w - m,
            h - m,
            h - m
        );
        for k in 0..=5 {
            let f = k as f64 / 5.0;
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{f:.1}</text>",
                m - 6.0,
                y_of(f) + 4.0
            );
        }
        for (i, c) in counts.iter().enumerate() {
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{c}</text>",
                x_of(i),
                h - m + 18.0
            );
        }
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">labeled instances</text>", w / 2.0, h - 12.0);
        let _ = writeln!(svg, "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">test micro-F1</text>", h / 2.0, h / 2.0);
        let colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
        let mut arms: Vec<Arm> = Vec::new();
        for r in &self.rows {
            if !arms.contains(&r.arm) {
                arms.push(r.arm);
            }
        }
        for (a, arm) in arms.iter().enumerate() {
            let colour = colours[a % colours.len()];
            let pts: Vec<(f64, &CurveRow)> = counts
                .iter()
                .enumerate()
                .filter_map(|(i, c)| {
                    self.rows
                        .iter()
                        .find(|r| r.arm == *arm && r.labeled_count == *c && r.runs > 0)
                        .map(|r| (x_of(i), r))
                })
                .collect();
            let line: Vec<String> = pts.iter().map(|(x, r)| format!("{x:.1},{:.1}", y_of(r.mean_f1))).collect();
            let _ = writeln!(svg, "<polyline points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\"/>", line.join(" "));
            for (x, r) in &pts {
                let _ = writeln!(
                    svg,
                    "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"{colour}\"/>\n<circle cx=\"{x:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{colour}\"/>",
                    y_of(r.mean_f1 - r.std_f1),
                    y_of(r.mean_f1 + r.std_f1),
                    y_of(r.mean_f1)
                );
            }
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" fill=\"{colour}\">{}</text>",
                w - m - 100.0,
                m + 16.0 * a as f64,
                arm.name()
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}
