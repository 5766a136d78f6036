//! The semi-supervised objective and its training loop.

pub mod config;
pub mod loss;
pub mod train;

pub use config::{Arm, TrainConfig};
pub use loss::{
    classification_term, kl_term, labeled_loss, labeled_vars, reconstruction_term, supervised_vars, unlabeled_loss,
    unlabeled_vars, LossBreakdown, LossVars, LossWeights, Noise,
};
pub use train::{build_vocab, evaluate_model, predict, train, train_model, EpochRecord, TrainOutcome, Trainer};
