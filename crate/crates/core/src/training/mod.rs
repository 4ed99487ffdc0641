//! Loss, learning-rate schedule, SGD with momentum and the training loop.

mod config;
mod loss;
mod schedule;
mod sgd;
mod trainer;

pub use config::{MomentumKind, TrainConfig};
pub use loss::pixel_ce_loss;
pub use schedule::poly_lr;
pub use sgd::sgd_step;
pub use trainer::{history_csv, train, train_with_progress, StepRecord, TrainOutcome};
