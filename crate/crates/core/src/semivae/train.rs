//! Alternating labeled/unlabeled RMSProp training with best-validation selection.

use serde::{Deserialize, Serialize};

use crate::corpus::{BatchIterator, DatasetSplit, LabelSchema, PreparedInstance, RelationInstance, Vocab};
use crate::error::{Error, Result};
use crate::harness::metrics::{evaluate, Metrics};
use crate::networks::Model;
use crate::numeric::{Gradients, Graph, Real, RmsProp, SeededRng};
use crate::semivae::config::{Arm, TrainConfig};
use crate::semivae::loss::{labeled_vars, supervised_vars, unlabeled_vars, LossBreakdown, LossWeights, Noise};

/// Model plus optimiser state and the noise stream driving training.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    pub model: Model<T>,
    pub optimizer: RmsProp<T>,
    pub arm: Arm,
    pub weights: LossWeights,
    pub z_samples: usize,
    pub clip_norm: Option<f64>,
    pub noise: SeededRng,
}

impl<T: Real> Trainer<T> {
    pub fn new(model: Model<T>, config: &TrainConfig) -> Self {
        Self {
            model,
            optimizer: RmsProp::new(config.optimizer),
            arm: config.arm,
            weights: LossWeights {
                alpha: config.alpha,
                kl: config.kl_weight(0),
            },
            z_samples: config.z_samples,
            clip_norm: config.clip_norm,
            noise: SeededRng::new(config.seed).fork(0x7a11),
        }
    }

    /// Mean loss over `batch` and its gradient. `labeled` selects the objective.
    pub fn batch_gradients(&mut self, batch: &[&PreparedInstance], labeled: bool) -> Result<(LossBreakdown, Gradients<T>)> {
        let n = batch.len();
        let scale = T::of(1.0 / n as f64);
        let mut total = Gradients::empty(self.model.store.len());
        let mut parts = Vec::with_capacity(n);
        for prep in batch {
            let noise = Noise::draw(&mut self.noise);
            let mut g = Graph::new(&self.model.store);
            let (loss, breakdown) = match (self.arm, labeled) {
                (Arm::Supervised, true) => {
                    let ce = supervised_vars(&mut g, &self.model, prep, &noise)?;
                    let v = g.scalar(ce).f64();
                    if !v.is_finite() {
                        return Err(Error::NonFinite { term: "classification" });
                    }
                    (
                        ce,
                        LossBreakdown {
                            classification: v,
                            total: v,
                            ..Default::default()
                        },
                    )
                }
                (Arm::Supervised, false) => {
                    return Err(Error::Config("the supervised arm has no unlabeled objective".into()))
                }
                (Arm::SemiSupervised, true) => {
                    let vars = labeled_vars(&mut g, &self.model, prep, self.weights, self.z_samples, &noise)?;
                    vars.check_finite(&g)?;
                    (vars.total, vars.breakdown(&g))
                }
                (Arm::SemiSupervised, false) => {
                    let vars = unlabeled_vars(&mut g, &self.model, prep, self.weights, self.z_samples, &noise)?;
                    vars.check_finite(&g)?;
                    (vars.total, vars.breakdown(&g))
                }
            };
            let loss = g.scale(loss, scale);
            total.add(&g.backward(loss)?);
            parts.push(breakdown);
        }
        Ok((LossBreakdown::mean(&parts), total))
    }

    /// One RMSProp update on the mean loss of `batch`.
    pub fn update(&mut self, batch: &[&PreparedInstance], labeled: bool) -> Result<LossBreakdown> {
        let (loss, grads) = self.batch_gradients(batch, labeled)?;
        let store = &mut self.model.store;
        store.zero_grads();
        store.accumulate(&grads);
        if let Some(c) = self.clip_norm {
            store.clip_grad_norm(T::of(c));
        }
        self.optimizer.step(store);
        Ok(loss)
    }

    /// Labeled update, then (semi-supervised arm, non-empty batch) an unlabeled update.
    pub fn train_step(
        &mut self,
        labeled: &[&PreparedInstance],
        unlabeled: &[&PreparedInstance],
    ) -> Result<(LossBreakdown, Option<LossBreakdown>)> {
        if labeled.is_empty() {
            return Err(Error::Config("a training step needs a non-empty labeled batch".into()));
        }
        let l = self.update(labeled, true)?;
        let u = if self.arm == Arm::SemiSupervised && !unlabeled.is_empty() {
            Some(self.update(unlabeled, false)?)
        } else {
            None
        };
        Ok((l, u))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub labeled: LossBreakdown,
    pub unlabeled: Option<LossBreakdown>,
    pub validation: Option<Metrics>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Parameters of the epoch with the best validation micro-F1 (the last epoch without validation data).
    pub model: Model<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Vocabulary of the training text (labeled and unlabeled).
pub fn build_vocab(split: &DatasetSplit, min_count: usize) -> Vocab {
    Vocab::build(split.training(), min_count)
}

fn gold(instances: &[RelationInstance]) -> Result<Vec<usize>> {
    instances
        .iter()
        .map(|i| i.label.ok_or_else(|| Error::MissingLabel(i.id.clone())))
        .collect()
}

pub fn predict<T: Real>(model: &Model<T>, instances: &[RelationInstance]) -> Result<Vec<usize>> {
    model.predict(instances)
}

/// Metrics of `model` on labeled `instances`.
pub fn evaluate_model<T: Real>(model: &Model<T>, instances: &[RelationInstance]) -> Result<Metrics> {
    evaluate(&model.predict(instances)?, &gold(instances)?, &model.schema)
}

/// Train from scratch on `split`.
pub fn train<T: Real>(config: &TrainConfig, split: &DatasetSplit, schema: &LabelSchema) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let vocab = build_vocab(split, config.min_count);
    let mut model = Model::<T>::new(config.dims.clone(), vocab, schema.clone(), config.seed);
    if let Some(path) = &config.embeddings {
        model.embeddings.load_pretrained(&mut model.store, path, &model.vocab)?;
    }
    if config.freeze_embeddings {
        model.embeddings.set_word_trainable(&mut model.store, false);
    }
    train_model(model, config, split)
}

/// Train an already initialised model on `split`.
pub fn train_model<T: Real>(model: Model<T>, config: &TrainConfig, split: &DatasetSplit) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if split.labeled.is_empty() {
        return Err(Error::Config("no labeled training instances".into()));
    }
    let labeled: Vec<PreparedInstance> = split.labeled.iter().map(|i| model.prepare(i)).collect();
    let unlabeled: Vec<PreparedInstance> = match config.arm {
        Arm::SemiSupervised => split.unlabeled.iter().map(|i| model.prepare(i)).collect(),
        Arm::Supervised => Vec::new(),
    };
    let mut trainer = Trainer::new(model, config);
    let mut batches = BatchIterator::new(
        labeled.len(),
        unlabeled.len(),
        config.batch_size,
        &SeededRng::new(config.seed).fork(0xba7c),
    );
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Vec<crate::numeric::Tensor<T>>)> = None;
    for epoch in 0..config.epochs {
        trainer.weights.kl = config.kl_weight(epoch);
        let mut l_losses = Vec::new();
        let mut u_losses = Vec::new();
        for step in batches.epoch(config.steps_per_epoch) {
            let lb: Vec<&PreparedInstance> = step.labeled.iter().map(|&i| &labeled[i]).collect();
            let ub: Vec<&PreparedInstance> = step.unlabeled.iter().map(|&i| &unlabeled[i]).collect();
            let (l, u) = trainer.train_step(&lb, &ub)?;
            l_losses.push(l);
            u_losses.extend(u);
        }
        let validation = if split.validation.is_empty() {
            None
        } else {
            Some(evaluate_model(&trainer.model, &split.validation)?)
        };
        let score = validation.as_ref().map_or(f64::NEG_INFINITY, |m| m.micro_f1);
        if validation.is_none() || best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, epoch, trainer.model.store.snapshot()));
        }
        history.push(EpochRecord {
            epoch,
            labeled: LossBreakdown::mean(&l_losses),
            unlabeled: (!u_losses.is_empty()).then(|| LossBreakdown::mean(&u_losses)),
            validation,
        });
    }
    let mut model = trainer.model;
    let best_epoch = match best {
        Some((_, epoch, snapshot)) => {
            model.store.restore(&snapshot);
            epoch
        }
        None => 0,
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::gradcheck::tiny_model;
    use crate::networks::ModelDims;
    use crate::numeric::ParamId;

    fn config(arm: Arm, alpha: f64) -> TrainConfig {
        TrainConfig {
            arm,
            alpha,
            dims: ModelDims::tiny(),
            seed: 4,
            ..Default::default()
        }
    }

    fn setup(arm: Arm, alpha: f64) -> (Trainer<f64>, Vec<PreparedInstance>, Vec<PreparedInstance>) {
        let (model, instances) = tiny_model(2);
        let prepared: Vec<PreparedInstance> = instances.iter().map(|i| model.prepare(i)).collect();
        let unlabeled = prepared
            .iter()
            .map(|p| PreparedInstance { label: None, ..p.clone() })
            .collect();
        (Trainer::new(model, &config(arm, alpha)), prepared, unlabeled)
    }

    #[test]
    fn empty_unlabeled_batch_gives_exactly_one_update() {
        let (mut a, labeled, _) = setup(Arm::SemiSupervised, 1.0);
        let mut b = a.clone();
        let batch: Vec<&PreparedInstance> = labeled.iter().collect();
        let (_, u) = a.train_step(&batch, &[]).unwrap();
        assert!(u.is_none());
        b.update(&batch, true).unwrap();
        assert_eq!(a.model.store.flat_values(), b.model.store.flat_values());
        assert_eq!(a.noise.clone().next_u64(), b.noise.clone().next_u64());
    }

    #[test]
    fn supervised_arm_ignores_unlabeled_batch() {
        let (mut a, labeled, unlabeled) = setup(Arm::Supervised, 1.0);
        let mut b = a.clone();
        let lb: Vec<&PreparedInstance> = labeled.iter().collect();
        let ub: Vec<&PreparedInstance> = unlabeled.iter().collect();
        a.train_step(&lb, &ub).unwrap();
        b.train_step(&lb, &[]).unwrap();
        assert_eq!(a.model.store.flat_values(), b.model.store.flat_values());
        assert!(a.update(&ub, false).is_err());
    }

    #[test]
    fn empty_labeled_batch_is_rejected() {
        let (mut t, _, unlabeled) = setup(Arm::SemiSupervised, 1.0);
        let ub: Vec<&PreparedInstance> = unlabeled.iter().collect();
        assert!(matches!(t.train_step(&[], &ub), Err(Error::Config(_))));
    }

    #[test]
    fn unlabeled_update_moves_the_classifier() {
        let (mut t, _, unlabeled) = setup(Arm::SemiSupervised, 1.0);
        let before: Vec<_> = t.model.classifier.param_ids().iter().map(|&id| t.model.store.value(id).clone()).collect();
        let ub: Vec<&PreparedInstance> = unlabeled.iter().collect();
        t.update(&ub, false).unwrap();
        let moved = t
            .model
            .classifier
            .param_ids()
            .iter()
            .zip(&before)
            .any(|(&id, old)| t.model.store.value(id) != old);
        assert!(moved);
    }

    fn cosine(a: &Gradients<f64>, b: &Gradients<f64>, ids: &[ParamId]) -> f64 {
        let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
        for &id in ids {
            if let (Some(x), Some(y)) = (a.get(id), b.get(id)) {
                for (u, v) in x.data().iter().zip(y.data()) {
                    ab += u * v;
                    aa += u * u;
                    bb += v * v;
                }
            }
        }
        ab / (aa.sqrt() * bb.sqrt())
    }

    #[test]
    fn large_alpha_aligns_with_pure_classification_gradient() {
        let (mut sup, labeled, _) = setup(Arm::Supervised, 1.0);
        let batch: Vec<&PreparedInstance> = labeled.iter().collect();
        let (_, reference) = sup.batch_gradients(&batch, true).unwrap();
        let mut ids = sup.model.classifier.param_ids();
        ids.push(sup.model.embeddings.word);
        ids.push(sup.model.embeddings.position);
        let mut cos = Vec::new();
        for alpha in [1.0, 1e2, 1e4] {
            let (mut semi, _, _) = setup(Arm::SemiSupervised, alpha);
            let (_, g) = semi.batch_gradients(&batch, true).unwrap();
            cos.push(cosine(&g, &reference, &ids));
        }
        assert!(cos[2] > 0.9999, "{cos:?}");
        assert!(cos[0] <= cos[1] + 1e-12 && cos[1] <= cos[2] + 1e-12, "{cos:?}");
    }

    #[test]
    fn kl_annealing_ramps_to_one() {
        let c = TrainConfig {
            kl_anneal_epochs: Some(4),
            ..Default::default()
        };
        let w: Vec<f64> = (0..6).map(|e| c.kl_weight(e)).collect();
        assert_eq!(w, vec![0.25, 0.5, 0.75, 1.0, 1.0, 1.0]);
        assert_eq!(TrainConfig::default().kl_weight(0), 1.0);
    }

    #[test]
    fn validate_rejects_bad_settings() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { alpha: 0.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { z_samples: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
