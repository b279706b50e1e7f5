use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{EarlyStopConfig, PlateauConfig};
use super::TrainError;

/// `base_lr · 0.5^floor(epoch / period)`.
pub fn step_halving_lr(base_lr: f64, epoch: usize, period: usize) -> f64 {
    base_lr * libm::pow(0.5, (epoch / period.max(1)) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    ValAccuracy,
    ValLoss,
    TrainAccuracy,
    TrainLoss,
}

impl Monitor {
    pub fn higher_is_better(self) -> bool {
        matches!(self, Monitor::ValAccuracy | Monitor::TrainAccuracy)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Monitor::ValAccuracy => "val_accuracy",
            Monitor::ValLoss => "val_loss",
            Monitor::TrainAccuracy => "train_accuracy",
            Monitor::TrainLoss => "train_loss",
        }
    }
}

impl fmt::Display for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Monitor {
    type Err = TrainError;
    fn from_str(s: &str) -> Result<Self, TrainError> {
        match s {
            "val_accuracy" | "val_acc" => Ok(Monitor::ValAccuracy),
            "val_loss" => Ok(Monitor::ValLoss),
            "train_accuracy" | "train_acc" | "accuracy" => Ok(Monitor::TrainAccuracy),
            "train_loss" | "loss" => Ok(Monitor::TrainLoss),
            other => Err(TrainError::UnknownMonitor(other.into())),
        }
    }
}

/// Slack absorbing rounding in differences such as `0.801 - 0.800`, so an
/// improvement of exactly `min_delta` does not count.
const DELTA_SLACK: f64 = 1e-12;

/// Whether `value` beats `best` by strictly more than `min_delta`.
pub fn improved(best: Option<f64>, value: f64, min_delta: f64, higher_is_better: bool) -> bool {
    match best {
        None => value.is_finite(),
        Some(b) => {
            let gain = if higher_is_better { value - b } else { b - value };
            gain > min_delta + DELTA_SLACK
        }
    }
}

/// Counts epochs since the last improvement of a monitored metric.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Stall {
    best: Option<f64>,
    wait: usize,
}

impl Stall {
    const fn new() -> Self {
        Self { best: None, wait: 0 }
    }

    fn observe(&mut self, value: f64, min_delta: f64, higher: bool) -> usize {
        if improved(self.best, value, min_delta, higher) {
            self.best = Some(value);
            self.wait = 0;
        } else {
            self.wait += 1;
        }
        self.wait
    }
}

/// Multiplies the rate by `factor` whenever the metric stalls for
/// `patience` epochs, then restarts the count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateauScheduler {
    cfg: PlateauConfig,
    higher: bool,
    stall: Stall,
    multiplier: f64,
}

impl PlateauScheduler {
    pub fn new(cfg: PlateauConfig, monitor: Monitor) -> Self {
        Self { cfg, higher: monitor.higher_is_better(), stall: Stall::new(), multiplier: 1.0 }
    }

    /// Records one epoch; returns whether a reduction fired.
    pub fn observe(&mut self, value: f64) -> bool {
        if !self.cfg.enabled {
            return false;
        }
        if self.stall.observe(value, self.cfg.min_delta, self.higher) >= self.cfg.patience {
            self.multiplier *= self.cfg.factor;
            self.stall.wait = 0;
            return true;
        }
        false
    }

    /// Product of all reductions so far.
    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }
}

/// The rate to use after `history`: `lr · factor` if the last observation
/// triggers a reduction, `lr` otherwise.
pub fn plateau_reduce(history: &[f64], lr: f64, cfg: PlateauConfig, monitor: Monitor) -> Result<f64, TrainError> {
    if history.is_empty() {
        return Err(TrainError::Config("plateau check needs at least one epoch".into()));
    }
    let mut p = PlateauScheduler::new(cfg, monitor);
    let mut fired = false;
    for &v in history {
        fired = p.observe(v);
    }
    Ok(if fired { lr * cfg.factor } else { lr })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EarlyStopping {
    cfg: EarlyStopConfig,
    higher: bool,
    stall: Stall,
}

impl EarlyStopping {
    pub fn new(cfg: EarlyStopConfig, monitor: Monitor) -> Self {
        Self { cfg, higher: monitor.higher_is_better(), stall: Stall::new() }
    }

    pub fn observe(&mut self, value: f64) -> StopDecision {
        if self.cfg.enabled && self.stall.observe(value, self.cfg.min_delta, self.higher) >= self.cfg.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

/// Replays `history` through [`EarlyStopping`] and reports the final decision.
pub fn early_stop_check(history: &[f64], patience: usize, min_delta: f64, monitor: Monitor) -> StopDecision {
    let mut s = EarlyStopping::new(EarlyStopConfig { enabled: true, patience, min_delta }, monitor);
    let mut d = StopDecision::Continue;
    for &v in history {
        d = s.observe(v);
    }
    d
}

/// Index of the first value that strictly beats all earlier ones last, i.e.
/// the epoch a save-best-only policy would have kept.
pub fn best_epoch(values: &[f64], monitor: Monitor) -> Option<usize> {
    let mut best: Option<f64> = None;
    let mut at = None;
    for (i, &v) in values.iter().enumerate() {
        if improved(best, v, 0.0, monitor.higher_is_better()) {
            best = Some(v);
            at = Some(i);
        }
    }
    at
}
