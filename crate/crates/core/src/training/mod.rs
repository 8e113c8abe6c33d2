//! Pairwise hinge-loss training with Adam, and five-fold cross-validation.

mod adam;
mod cv;
mod folds;
mod loss;
mod sampling;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use cv::{cross_validate, prepare_queries, CvOutcome, FoldOutcome};
pub use folds::{make_folds, Fold, FoldPlan, NUM_FOLDS};
pub use loss::{hinge_grad, hinge_loss};
pub use sampling::{candidate_pools, sample_instances, TrainingInstance};
pub use trainer::{candidate_run, derive_seed, rerank_all, train, TrainConfig, TrainOutcome};
