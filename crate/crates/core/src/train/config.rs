use alloc::format;

use serde::{Deserialize, Serialize};

use super::schedule::Monitor;
use super::TrainError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LrSchedule {
    None,
    /// Halve the rate every `period` epochs.
    StepHalving { period: usize },
}

/// Multiply the rate by `factor` after `patience` epochs without an
/// improvement larger than `min_delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlateauConfig {
    pub enabled: bool,
    pub factor: f64,
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self { enabled: true, factor: 0.3, patience: 2, min_delta: 0.001 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EarlyStopConfig {
    pub enabled: bool,
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for EarlyStopConfig {
    fn default() -> Self {
        Self { enabled: false, patience: 2, min_delta: 0.001 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub base_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_schedule: LrSchedule,
    pub plateau: PlateauConfig,
    pub early_stop: EarlyStopConfig,
    pub monitor: Monitor,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::diacnn()
    }
}

impl TrainConfig {
    /// Adam at 1e-3 for 50 epochs, batch 64, plateau reduction on validation accuracy.
    pub fn diacnn() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            base_lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 64,
            epochs: 50,
            lr_schedule: LrSchedule::None,
            plateau: PlateauConfig::default(),
            early_stop: EarlyStopConfig::default(),
            monitor: Monitor::ValAccuracy,
            seed: 0,
        }
    }

    /// Fine-tuning recipe: 1e-4 halved every five epochs, 30 epochs.
    pub fn transfer() -> Self {
        Self {
            base_lr: 1e-4,
            epochs: 30,
            lr_schedule: LrSchedule::StepHalving { period: 5 },
            plateau: PlateauConfig { enabled: false, ..PlateauConfig::default() },
            ..Self::diacnn()
        }
    }

    /// Pretrained-model table settings: 1e-5 for 20 epochs, batch 64.
    pub fn pretrained_table() -> Self {
        Self { base_lr: 1e-5, epochs: 20, lr_schedule: LrSchedule::None, ..Self::transfer() }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "diacnn" => Some(Self::diacnn()),
            "transfer" => Some(Self::transfer()),
            "pretrained_table" => Some(Self::pretrained_table()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: alloc::string::String| Err(TrainError::Config(msg));
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return bad(format!("base_lr must be positive, got {}", self.base_lr));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("betas must lie in [0, 1), got {} and {}", self.beta1, self.beta2));
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive".into());
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be at least 1".into());
        }
        if let LrSchedule::StepHalving { period: 0 } = self.lr_schedule {
            return bad("step halving period must be at least 1".into());
        }
        if self.plateau.patience == 0 || self.early_stop.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if !(self.plateau.factor > 0.0 && self.plateau.factor < 1.0) {
            return bad(format!("plateau factor must lie in (0, 1), got {}", self.plateau.factor));
        }
        if self.plateau.min_delta < 0.0 || self.early_stop.min_delta < 0.0 {
            return bad("min_delta must be nonnegative".into());
        }
        Ok(())
    }
}
