//! Optimizers, learning-rate control and the training loop.

mod config;
mod error;
mod fit;
mod optim;
mod schedule;

pub use config::{EarlyStopConfig, LrSchedule, OptimizerKind, PlateauConfig, TrainConfig};
pub use error::TrainError;
pub use fit::{evaluate_set, train_loop, EpochRecord, History, TrainData, TrainEvent, TrainOutcome};
pub use optim::{adam_step, sgd_step, AdamHyper, AdamState, Optimizer};
pub use schedule::{
    best_epoch, early_stop_check, improved, plateau_reduce, step_halving_lr, EarlyStopping, Monitor, PlateauScheduler, StopDecision,
};
