//! Precision, recall and F1 with micro-averaging over the non-negative classes.

use serde::{Deserialize, Serialize};

use crate::corpus::LabelSchema;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(c: Counts) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        Self {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub counts: Vec<Counts>,
    pub per_class: Vec<Prf>,
    /// Pooled over every class except the negative one.
    pub micro: Counts,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub negative: usize,
}

/// Confusion counts per class and the micro average over non-negative classes.
pub fn evaluate(predictions: &[usize], gold: &[usize], schema: &LabelSchema) -> Result<Metrics> {
    if predictions.len() != gold.len() {
        return Err(Error::Shape {
            op: "evaluate",
            lhs: vec![predictions.len()],
            rhs: vec![gold.len()],
        });
    }
    let k = schema.len();
    let mut counts = vec![Counts::default(); k];
    for (&p, &g) in predictions.iter().zip(gold) {
        for (what, i) in [("prediction", p), ("gold label", g)] {
            if i >= k {
                return Err(Error::IndexOutOfRange { what, index: i, size: k });
            }
        }
        if p == g {
            counts[p].tp += 1;
        } else {
            counts[p].fp += 1;
            counts[g].fn_ += 1;
        }
    }
    let negative = schema.negative;
    let micro = counts
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != negative)
        .fold(Counts::default(), |acc, (_, c)| Counts {
            tp: acc.tp + c.tp,
            fp: acc.fp + c.fp,
            fn_: acc.fn_ + c.fn_,
        });
    let pooled = Prf::from_counts(micro);
    Ok(Metrics {
        per_class: counts.iter().copied().map(Prf::from_counts).collect(),
        counts,
        micro,
        micro_precision: pooled.precision,
        micro_recall: pooled.recall,
        micro_f1: pooled.f1,
        negative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> LabelSchema {
        LabelSchema::new(vec!["A".into(), "B".into(), "Neg".into()], 2).unwrap()
    }

    #[test]
    fn hand_example() {
        // gold [A, A, Neg], pred [A, Neg, A]
        let m = evaluate(&[0, 2, 0], &[0, 0, 2], &schema()).unwrap();
        assert_eq!(m.counts[0], Counts { tp: 1, fp: 1, fn_: 1 });
        assert_eq!(m.micro_precision, 0.5);
        assert_eq!(m.micro_recall, 0.5);
        assert_eq!(m.micro_f1, 0.5);
    }

    #[test]
    fn perfect_predictions() {
        let gold = [0, 1, 2, 1, 0];
        let m = evaluate(&gold, &gold, &schema()).unwrap();
        assert_eq!(m.micro_f1, 1.0);
        assert!(m.per_class.iter().all(|p| p.f1 == 1.0));
    }

    #[test]
    fn harmonic_mean() {
        assert!((f1(0.6, 0.3) - 0.4).abs() < 1e-12);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn length_mismatch_and_range() {
        assert!(evaluate(&[0], &[0, 1], &schema()).is_err());
        assert!(evaluate(&[3], &[0], &schema()).is_err());
    }

    #[test]
    fn all_negative_gives_zero() {
        let m = evaluate(&[2, 2], &[2, 2], &schema()).unwrap();
        assert_eq!(m.micro_f1, 0.0);
    }
}
