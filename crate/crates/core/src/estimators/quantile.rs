use ndarray::Axis;
use rayon::prelude::*;

use super::model::snapshot;
use super::train::{derive_seed, fit, init_network, standardized_train};
use super::{
    Predictor, QuantileConfig, TrainConfig, TrainError, Trained, TrainedIntervalModel, TrainingLog,
};
use crate::data::{Dataset, Splits};
use crate::losses::pinball_loss;
use crate::metrics::{mpiw, picp};
use crate::nn::Network;

/// Validation score of one `(τ_l, τ_u)` grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridScore {
    pub tau_lower: f64,
    pub tau_upper: f64,
    /// Calibration-split scale factor; `None` if the cell failed to train or calibrate.
    pub k: Option<f64>,
    /// Validation MPIW after scaling by `k`.
    pub validation_mpiw: f64,
    pub validation_picp: f64,
}

/// All pairs `τ_l < τ_u` from `{min, min + step, …, max}`.
pub fn quantile_grid(min: f64, max: f64, step: f64) -> Result<Vec<(f64, f64)>, TrainError> {
    if !(0.0 < min && min <= max && max < 1.0 && step > 0.0) {
        return Err(TrainError::Config(format!(
            "quantile grid needs 0 < min ≤ max < 1 and step > 0, got [{min}, {max}] step {step}"
        )));
    }
    let steps = (max - min) / step;
    let count = steps.round();
    if (steps - count).abs() > 1e-9 {
        return Err(TrainError::Config(format!(
            "grid step {step} does not divide the range [{min}, {max}]"
        )));
    }
    // Rounded so that e.g. 0.05 + 2·0.05 prints as 0.15.
    let levels: Vec<f64> = (0..=count as usize)
        .map(|i| ((min + i as f64 * step) * 1e10).round() / 1e10)
        .collect();
    let pairs: Vec<(f64, f64)> = levels
        .iter()
        .enumerate()
        .flat_map(|(i, &lo)| levels[i + 1..].iter().map(move |&hi| (lo, hi)))
        .collect();
    if pairs.is_empty() {
        return Err(TrainError::Config(format!(
            "quantile grid over [{min}, {max}] step {step} has no pair with τ_l < τ_u"
        )));
    }
    Ok(pairs)
}

fn train_pair(
    train: &Dataset,
    cfg: &QuantileConfig,
    tc: &TrainConfig,
    (tau_lower, tau_upper): (f64, f64),
    seed: u64,
    phase: &str,
    log: &mut TrainingLog,
) -> Result<Network, TrainError> {
    let y = train.targets();
    let mut net = init_network(&cfg.net, train.dim(), 2, derive_seed(seed, 0))?;
    fit(
        &mut net,
        train.features(),
        tc,
        derive_seed(seed, 1),
        false,
        phase,
        log,
        |out, idx| {
            Ok(pinball_loss(out, y.select(Axis(0), idx).view(), tau_lower, tau_upper)?.into())
        },
    )?;
    Ok(net)
}

fn model_for(
    net: Network,
    pair: (f64, f64),
    splits: &Splits,
    target: f64,
    seed: u64,
    config: toml::Table,
) -> TrainedIntervalModel {
    TrainedIntervalModel::from_parts(
        Predictor::Quantile {
            net,
            tau_lower: pair.0,
            tau_upper: pair.1,
        },
        splits.scaling.clone(),
        Some(target),
        seed,
        config,
    )
}

/// Grid search over quantile pairs for coverage `target`.
///
/// Every cell trains for `search_epochs`, is calibrated on the calibration
/// split and scored by scaled MPIW on the validation split. The best pair is
/// retrained with the full schedule. Cells run in parallel.
pub fn train_quantile(
    splits: &Splits,
    cfg: &QuantileConfig,
    target: f64,
    seed: u64,
) -> Result<Trained, TrainError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(TrainError::Config(format!(
            "coverage target must lie in (0, 1), got {target}"
        )));
    }
    let pairs = quantile_grid(cfg.grid_min, cfg.grid_max, cfg.grid_step)?;
    let train = standardized_train(splits)?;
    let config = snapshot(cfg)?;
    let search_cfg = TrainConfig {
        epochs: cfg.search_epochs,
        ..cfg.train.clone()
    };
    search_cfg.validate("quantile.search")?;
    cfg.train.validate("quantile.train")?;

    let search: Vec<GridScore> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, &pair)| {
            let cell_seed = derive_seed(seed, 1000 + i as u64);
            let scored = train_pair(
                &train,
                cfg,
                &search_cfg,
                pair,
                cell_seed,
                "quantile_search",
                &mut TrainingLog::default(),
            )
            .and_then(|net| {
                let mut m = model_for(net, pair, splits, target, seed, toml::Table::new());
                let k = m.calibrate(&splits.calibration, target)?;
                let scaled = m.predict_batch(&splits.validation, target)?;
                Ok((k, mpiw(&scaled), picp(&scaled)))
            });
            match scored {
                Ok((k, w, p)) => Ok(GridScore {
                    tau_lower: pair.0,
                    tau_upper: pair.1,
                    k: Some(k),
                    validation_mpiw: w,
                    validation_picp: p,
                }),
                Err(e @ (TrainError::Divergence { .. } | TrainError::Metrics(_))) => {
                    log::warn!("quantile cell {pair:?} skipped: {e}");
                    Ok(GridScore {
                        tau_lower: pair.0,
                        tau_upper: pair.1,
                        k: None,
                        validation_mpiw: f64::INFINITY,
                        validation_picp: f64::NAN,
                    })
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, TrainError>>()?;

    let best = search
        .iter()
        .filter(|s| s.k.is_some())
        .min_by(|a, b| a.validation_mpiw.total_cmp(&b.validation_mpiw))
        .ok_or_else(|| TrainError::Config("every quantile grid cell failed".into()))?;
    let pair = (best.tau_lower, best.tau_upper);
    log::info!(
        "quantile target {target}: selected ({}, {}) with validation MPIW {}",
        pair.0,
        pair.1,
        best.validation_mpiw
    );

    let mut log = TrainingLog::default();
    let net = train_pair(
        &train,
        cfg,
        &cfg.train,
        pair,
        derive_seed(seed, 1),
        "quantile",
        &mut log,
    )?;
    let mut model = model_for(net, pair, splits, target, seed, config);
    model.calibrate(&splits.calibration, target)?;
    Ok(Trained { model, log, search })
}
