//! Metrics, checkpoints, learning-curve experiments and gradient checks.

pub mod checkpoint;
pub mod curve;
pub mod gradcheck;
pub mod metrics;

pub use checkpoint::{load_checkpoint, read_manifest, save_checkpoint, Manifest, ParamEntry, FORMAT_VERSION};
pub use curve::{aggregate, mean_std, run_learning_curve, CurveReport, CurveRow, CurveRun, CurveSpec, LabeledCount};
pub use gradcheck::{GradCheckConfig, GradCheckResult};
pub use metrics::{evaluate, Counts, Metrics, Prf};
