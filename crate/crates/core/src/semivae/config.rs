use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::networks::ModelDims;
use crate::numeric::RmsPropConfig;

/// Which objective the labeled data is trained with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    /// Classifier cross-entropy only; unlabeled data unused.
    Supervised,
    /// Labeled bound plus weighted cross-entropy, and the marginalised unlabeled bound.
    SemiSupervised,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Supervised => "supervised",
            Arm::SemiSupervised => "semi-vae",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub arm: Arm,
    /// Weight of the classification term in the labeled objective.
    pub alpha: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Overrides `ceil(max(|labeled|, |unlabeled|) / batch_size)`.
    pub steps_per_epoch: Option<usize>,
    pub optimizer: RmsPropConfig,
    /// Global gradient-norm clip; `None` disables it.
    pub clip_norm: Option<f64>,
    pub dims: ModelDims,
    pub seed: u64,
    /// Labeled training instances drawn from the labeled pool.
    pub labeled_count: usize,
    pub validation_count: usize,
    pub test_count: usize,
    /// Reparameterised z samples per instance per step.
    pub z_samples: usize,
    /// Linear KL warm-up over this many epochs; `None` keeps the KL weight at 1.
    pub kl_anneal_epochs: Option<usize>,
    /// Vocabulary entries seen fewer times than this map to UNK.
    pub min_count: usize,
    pub embeddings: Option<PathBuf>,
    pub freeze_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arm: Arm::SemiSupervised,
            alpha: 1.0,
            batch_size: 64,
            epochs: 50,
            steps_per_epoch: None,
            optimizer: RmsPropConfig::default(),
            clip_norm: Some(5.0),
            dims: ModelDims::default(),
            seed: 1,
            labeled_count: 500,
            validation_count: 500,
            test_count: 500,
            z_samples: 1,
            kl_anneal_epochs: None,
            min_count: 1,
            embeddings: None,
            freeze_embeddings: false,
        }
    }
}

impl TrainConfig {
    /// KL weight at a 0-based epoch.
    pub fn kl_weight(&self, epoch: usize) -> f64 {
        match self.kl_anneal_epochs {
            Some(n) if n > 0 => ((epoch + 1) as f64 / n as f64).min(1.0),
            _ => 1.0,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let bad = |msg: String| Err(crate::Error::Config(msg));
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.batch_size == 0 || self.z_samples == 0 {
            return bad("batch_size and z_samples must be at least 1".into());
        }
        if self.dims.filter_windows.is_empty() || self.dims.decoder_widths.is_empty() {
            return bad("classifier and decoder need at least one conv layer".into());
        }
        Ok(())
    }
}
