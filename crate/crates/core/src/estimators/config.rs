use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::losses::{EimConfig, KSelection};
use crate::nn::{Activation, OptimizerKind};

/// Hidden-layer layout; input and output widths come from the data and method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::adam(),
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 128,
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate(&self, what: &str) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config(format!(
                "{what}: batch_size must be positive"
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config(format!(
                "{what}: learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedConfig {
    pub net: NetConfig,
    pub train: TrainConfig,
    /// Relative half-width `α` of `[(1 − α)f, (1 + α)f]`.
    pub alpha: f64,
}

impl Default for FixedConfig {
    fn default() -> Self {
        Self {
            net: NetConfig::default(),
            train: TrainConfig::default(),
            alpha: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MleConfig {
    pub net: NetConfig,
    /// Used for both the mean and the variance network.
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub net: NetConfig,
    /// Training of each bootstrap member.
    pub train: TrainConfig,
    /// Training of the noise-variance network.
    pub noise_train: TrainConfig,
    /// Bootstrap network count `M`.
    pub members: usize,
    /// Group count `M₂`; must divide `members`.
    pub groups: usize,
    /// Resample count `P` for the model-variance estimate.
    pub resamples: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            net: NetConfig::default(),
            train: TrainConfig {
                epochs: 10,
                ..TrainConfig::default()
            },
            noise_train: TrainConfig::default(),
            members: 24,
            groups: 8,
            resamples: 1000,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.train.validate("ensemble.train")?;
        self.noise_train.validate("ensemble.noise_train")?;
        if self.groups < 2 {
            return Err(TrainError::Config(
                "ensemble needs at least 2 groups".into(),
            ));
        }
        if self.members == 0 || !self.members.is_multiple_of(self.groups) {
            return Err(TrainError::Config(format!(
                "ensemble members ({}) must be a positive multiple of groups ({})",
                self.members, self.groups
            )));
        }
        if self.resamples == 0 {
            return Err(TrainError::Config(
                "ensemble resamples must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantileConfig {
    pub net: NetConfig,
    /// Training of the selected pair.
    pub train: TrainConfig,
    /// Epochs for each grid cell during the search.
    pub search_epochs: usize,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_step: f64,
}

impl Default for QuantileConfig {
    fn default() -> Self {
        Self {
            net: NetConfig::default(),
            train: TrainConfig::default(),
            search_epochs: 2,
            grid_min: 0.05,
            grid_max: 0.95,
            grid_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EimTrainConfig {
    pub net: NetConfig,
    /// Pretraining on the fixed band `[y − α, y + α]`.
    pub pretrain: TrainConfig,
    pub train: TrainConfig,
    /// Window half-width in percentile points.
    pub delta: f64,
    pub selection: KSelection,
    pub detach_k: bool,
    pub min_batch: usize,
    /// Pretraining band half-width in target units; defaults to one standard
    /// deviation of the training targets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrain_alpha: Option<f64>,
}

impl Default for EimTrainConfig {
    fn default() -> Self {
        Self {
            net: NetConfig::default(),
            pretrain: TrainConfig {
                epochs: 5,
                batch_size: 512,
                ..TrainConfig::default()
            },
            train: TrainConfig {
                epochs: 30,
                batch_size: 512,
                ..TrainConfig::default()
            },
            delta: 2.0,
            selection: KSelection::Window,
            detach_k: false,
            min_batch: 100,
            pretrain_alpha: None,
        }
    }
}

impl EimTrainConfig {
    pub fn loss_config(&self, target: f64) -> EimConfig {
        EimConfig {
            target,
            delta: self.delta,
            selection: self.selection,
            detach_k: self.detach_k,
            min_batch: self.min_batch,
        }
    }
}
