//! Prediction intervals for regression with neural networks.
//!
//! The crate trains feedforward networks that emit a `[lower, upper]` interval
//! per sample. Five methods are provided: expanded interval minimization (EIM),
//! which trains a dual-output network directly on minibatch coverage and width,
//! plus four baselines (fixed bounds, maximum likelihood, bootstrap ensemble and
//! quantile regression). Every method is post-hoc calibrated on a holdout split
//! with a midpoint-preserving scale factor so that models can be compared at
//! equal coverage (PICP) by their mean width (MPIW).
//!
//! Module map:
//!
//! - [`nn`]: dense layers, reverse-mode gradients, optimizers, parameter files.
//! - [`losses`]: every training loss together with its output gradient.
//! - [`metrics`]: PICP, MPIW, interval scaling and holdout calibration.
//! - [`data`]: CSV ingestion, synthetic generators with exact oracles, splits
//!   and minibatching.
//! - [`estimators`]: the five training pipelines and model bundles.
//! - [`stats`]: normal distribution helpers.

pub mod data;
pub mod estimators;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod stats;

pub use data::{Dataset, Scaling, SplitSpec, Splits, SyntheticKind, SyntheticSpec};
pub use estimators::{Method, Trained, TrainedIntervalModel};
pub use metrics::{Interval, IntervalBatch};
pub use nn::{Activation, DenseLayer, Network, Optimizer, OptimizerKind};
