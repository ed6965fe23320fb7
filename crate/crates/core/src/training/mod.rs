//! Exact gradients, Adam, the frame-level training loop and checkpoints.

mod adam;
mod checkpoint;
mod gradients;
mod trainer;

pub use adam::{adam_step, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{
    decode_tensors, encode_tensors, load_checkpoint, save_checkpoint, save_checkpoint_as, Checkpoint, Dtype,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use gradients::{compute_gradients, gradient_check, gradient_check_at, relative_error, GradCheckEntry, GradCheckReport, Objective};
pub use trainer::{
    lr_at, train, train_epochs, DenoiserObjective, TimestepSampling, TrainConfig, TrainState, TrainingSet,
};
