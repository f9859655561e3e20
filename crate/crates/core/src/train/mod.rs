//! Joint loss, optimization and the epoch loop.

pub mod checkpoint;
pub mod loss;
pub mod optim;
pub mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Manifest};
pub use loss::{joint_loss, LossTerms};
pub use optim::{clip_gradients, global_norm, lr_schedule, Adam, AdamConfig};
pub use trainer::{
    accumulate_batch, evaluate_loss, train, BatchRecord, EpochRecord, LossAverages, Quiet, TrainConfig,
    TrainObserver, TrainOutcome, TrainState,
};
