//! Training pipelines for the five interval methods.
//!
//! Each `train_*` function fits its networks on the standardized training
//! split, calibrates the midpoint scale factor `k` on the calibration split
//! for the requested coverage target and returns a [`TrainedIntervalModel`]
//! together with its training log.

mod bundle;
mod config;
mod eim;
mod ensemble;
mod fixed;
mod mle;
mod model;
mod quantile;
mod train;

pub use bundle::{load_bundle, save_bundle, BUNDLE_MANIFEST, BUNDLE_VERSION};
pub use config::{
    EimTrainConfig, EnsembleConfig, FixedConfig, MleConfig, NetConfig, QuantileConfig, TrainConfig,
};
pub use eim::train_eim;
pub use ensemble::{bootstrap_model_variance, resample_indices, train_ensemble};
pub use fixed::train_fixed;
pub use mle::train_mle;
pub use model::{Calibration, Predictor, TrainedIntervalModel};
pub use quantile::{quantile_grid, train_quantile, GridScore};
pub use train::{derive_seed, LogRecord, TrainingLog};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::losses::LossError;
use crate::metrics::MetricsError;
use crate::nn::NnError;

/// Interval method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fixed,
    Mle,
    Ensemble,
    Quantile,
    Eim,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Fixed,
        Method::Mle,
        Method::Ensemble,
        Method::Quantile,
        Method::Eim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fixed => "fixed",
            Method::Mle => "mle",
            Method::Ensemble => "ensemble",
            Method::Quantile => "quantile",
            Method::Eim => "eim",
        }
    }

    /// Whether intervals are symmetric about a point prediction.
    pub fn is_symmetric(self) -> bool {
        matches!(self, Method::Fixed | Method::Mle | Method::Ensemble)
    }

    /// Whether the method is trained for a particular coverage target.
    pub fn is_target_specific(self) -> bool {
        matches!(self, Method::Quantile | Method::Eim)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                TrainError::Config(format!(
                    "unknown method `{s}` (expected one of: fixed, mle, ensemble, quantile, eim)"
                ))
            })
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged in phase `{phase}` at step {step}: non-finite loss")]
    Divergence { phase: String, step: usize },
    #[error("loss error in phase `{phase}` at step {step}: {source}")]
    Loss {
        phase: String,
        step: usize,
        #[source]
        source: LossError,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("model has no calibration for target {0}")]
    Uncalibrated(f64),
    #[error("bundle error: {0}")]
    Bundle(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TrainError {
    /// Whether the failure is a numerical divergence during optimisation.
    pub fn is_divergence(&self) -> bool {
        matches!(self, TrainError::Divergence { .. })
    }
}

/// A trained model and the log of how it got there.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: TrainedIntervalModel,
    pub log: TrainingLog,
    /// Validation scores of every searched `(τ_l, τ_u)` pair (quantile only).
    pub search: Vec<GridScore>,
}
