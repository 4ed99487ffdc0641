//! Metrics, the held-out-fold zero-shot protocol and ablation harnesses.

mod ablation;
mod folds;
mod harness;
mod metrics;
mod zero_shot;

pub use ablation::{ablation_depth, ablation_embed_dim, AblationRow, AblationSetup, AblationTable};
pub use folds::{FoldSpec, DEFAULT_FOLDS};
pub use harness::{constant_prediction, evaluate_samples};
pub use metrics::{fb_iou, miou, pixacc, ConfusionMatrix, IouReport};
pub use zero_shot::{
    evaluate_fold, run_zero_shot, train_for_fold, zero_shot_fold_eval, FoldResult, LabelScope,
    ZeroShotBenchmark, ZeroShotReport, TILE,
};
