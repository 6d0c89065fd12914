//! Synthetic shifted datasets, MLP models, optimizers and the training loop.

mod data;
mod model;
mod optim;
mod train;

pub use data::{apply_shift, make_dataset, DatasetBundle, DatasetKind, LabeledBatch, ShiftKind, MAX_SEVERITY};
pub use model::{Activation, BatchObjective, InitScheme, LossOutput, Mode, ModelSpec};
pub use optim::{Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, RMSPROP_ALPHA, RMSPROP_EPS};
pub use train::{
    argmax, evaluate, evaluate_logits, params_digest, train_run, Evaluation, GradTrace, RunRecord, RunStatus, Snapshot,
    TrainConfig, SNAPSHOT_EPOCHS,
};
