use alloc::vec::Vec;
use core::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::config::{LrSchedule, OptimizerKind, TrainConfig};
use super::optim::{AdamHyper, AdamState, Optimizer};
use super::schedule::{improved, step_halving_lr, EarlyStopping, Monitor, PlateauScheduler, StopDecision};
use super::TrainError;
use crate::data::{batch_iter, AugmentConfig, BatchOptions, ImageSet};
use crate::net::{Model, NetError, ParamStore};
use crate::rng::derive_seed;
use crate::tensor::TensorError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Zero-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    /// Rate used during this epoch.
    pub lr: f64,
}

impl EpochRecord {
    pub fn metric(&self, m: Monitor) -> f64 {
        match m {
            Monitor::ValAccuracy => self.val_acc,
            Monitor::ValLoss => self.val_loss,
            Monitor::TrainAccuracy => self.train_acc,
            Monitor::TrainLoss => self.train_loss,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    /// The observer asked to stop.
    pub halted: bool,
}

impl History {
    pub fn metric(&self, m: Monitor) -> Vec<f64> {
        self.records.iter().map(|r| r.metric(m)).collect()
    }
}

pub struct TrainData<'a> {
    pub train: &'a ImageSet,
    pub val: &'a ImageSet,
    /// Augmentation for training batches; validation batches are never augmented.
    pub augment: Option<AugmentConfig>,
}

pub enum TrainEvent<'a> {
    Epoch {
        record: &'a EpochRecord,
        /// The monitored metric set a new best and the checkpoint was replaced.
        improved: bool,
        model: &'a Model<f32>,
    },
    EarlyStop {
        epoch: usize,
    },
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub history: History,
    /// Parameters from the best epoch.
    pub best: ParamStore<f32>,
}

/// Mean cross-entropy and accuracy of `model` over `set` in inference mode.
pub fn evaluate_set(model: &Model<f32>, set: &ImageSet, batch_size: usize) -> Result<(f64, f64), TrainError> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for batch in batch_iter(set, &BatchOptions::eval(batch_size))? {
        let n = batch.labels.len();
        let (l, probs) = model.evaluate(&batch.images, &batch.labels)?;
        loss += l * n as f64;
        correct += count_correct(probs.data(), &batch.labels);
    }
    Ok((loss / set.len() as f64, correct as f64 / set.len() as f64))
}

fn count_correct(scores: &[f32], labels: &[usize]) -> usize {
    let k = scores.len() / labels.len();
    scores
        .chunks_exact(k)
        .zip(labels)
        .filter(|(row, &y)| {
            // first maximum wins ties
            let mut arg = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[arg] {
                    arg = j;
                }
            }
            arg == y
        })
        .count()
}

fn diverged(e: NetError, epoch: usize, batch: usize) -> TrainError {
    match e {
        NetError::Tensor(TensorError::NonFinite { .. }) => TrainError::Diverged { epoch, batch },
        other => TrainError::Net(other),
    }
}

/// Trains `model` in place.
///
/// Each epoch shuffles the training set with a permutation derived from
/// `cfg.seed` and the epoch, takes one optimizer step per batch, then scores
/// the validation set in inference mode. The rate for epoch `e` is the
/// schedule value for `e` times the accumulated plateau multiplier. The
/// best-epoch snapshot is replaced only when the monitored metric strictly
/// beats the previous best. Returning `Break` from the observer after an
/// epoch ends training there.
pub fn train_loop(
    model: &mut Model<f32>,
    data: &TrainData<'_>,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(TrainEvent<'_>) -> ControlFlow<()>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(TrainError::Config("training and validation splits must be nonempty".into()));
    }
    let mut optimizer = match cfg.optimizer {
        OptimizerKind::Sgd => Optimizer::Sgd,
        OptimizerKind::Adam => Optimizer::Adam {
            state: AdamState::new(&model.params),
            hyper: AdamHyper { beta1: cfg.beta1, beta2: cfg.beta2, eps: cfg.adam_eps },
        },
    };
    let mut plateau = PlateauScheduler::new(cfg.plateau, cfg.monitor);
    let mut stopper = EarlyStopping::new(cfg.early_stop, cfg.monitor);
    let mut history = History::default();
    let mut best_value: Option<f64> = None;
    let mut best = model.params.clone();
    let augment = data.augment.clone().map(|a| (a, derive_seed(cfg.seed, 0xA06)));

    for epoch in 0..cfg.epochs {
        let scheduled = match cfg.lr_schedule {
            LrSchedule::None => cfg.base_lr,
            LrSchedule::StepHalving { period } => step_halving_lr(cfg.base_lr, epoch, period),
        };
        let lr = scheduled * plateau.multiplier();
        let opts = BatchOptions {
            batch_size: cfg.batch_size,
            shuffle_seed: Some(cfg.seed),
            epoch: epoch as u64,
            augment: augment.clone(),
            normalize01: true,
        };
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, batch) in batch_iter(data.train, &opts)?.enumerate() {
            let step = model.train_step(&batch.images, &batch.labels).map_err(|e| diverged(e, epoch, b))?;
            if !step.loss.is_finite() {
                return Err(TrainError::Diverged { epoch, batch: b });
            }
            loss_sum += step.loss * batch.labels.len() as f64;
            correct += count_correct(step.logits.data(), &batch.labels);
            optimizer.step(&mut model.params, &step.grads, lr)?;
        }
        let n = data.train.len() as f64;
        let (val_loss, val_acc) = evaluate_set(model, data.val, cfg.batch_size).map_err(|e| match e {
            TrainError::Net(ne) => diverged(ne, epoch, usize::MAX),
            other => other,
        })?;
        let record = EpochRecord { epoch, train_loss: loss_sum / n, train_acc: correct as f64 / n, val_loss, val_acc, lr };
        let value = record.metric(cfg.monitor);
        let is_best = improved(best_value, value, 0.0, cfg.monitor.higher_is_better());
        if is_best {
            best_value = Some(value);
            best = model.params.clone();
            history.best_epoch = Some(epoch);
        }
        history.records.push(record);
        if observer(TrainEvent::Epoch { record: history.records.last().unwrap(), improved: is_best, model }).is_break() {
            history.halted = true;
            break;
        }
        plateau.observe(value);
        if stopper.observe(value) == StopDecision::Stop {
            history.stopped_early = true;
            let _ = observer(TrainEvent::EarlyStop { epoch });
            break;
        }
    }
    Ok(TrainOutcome { history, best })
}
