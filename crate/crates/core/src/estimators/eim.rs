use ndarray::Axis;

use super::model::snapshot;
use super::train::{derive_seed, fit, init_network, standardized_train, StepLoss};
use super::{EimTrainConfig, Predictor, TrainError, Trained, TrainedIntervalModel, TrainingLog};
use crate::data::Splits;
use crate::losses::{eim_loss, pretrain_loss, select_k};

/// Dual-output interval network trained for coverage `target`.
///
/// Pretraining fits the band `[y − α, y + α]`; the main phase minimises the
/// expanded interval width. The result is calibrated at `target`.
pub fn train_eim(
    splits: &Splits,
    cfg: &EimTrainConfig,
    target: f64,
    seed: u64,
) -> Result<Trained, TrainError> {
    let loss_cfg = cfg.loss_config(target);
    loss_cfg
        .validate()
        .map_err(|e| TrainError::Config(e.to_string()))?;
    if cfg.train.batch_size < cfg.min_batch {
        return Err(TrainError::Config(format!(
            "eim batch_size {} is below the minimum {}",
            cfg.train.batch_size, cfg.min_batch
        )));
    }
    let train = standardized_train(splits)?;
    if train.len() < cfg.min_batch {
        return Err(TrainError::Config(format!(
            "eim needs at least {} training rows, got {}",
            cfg.min_batch,
            train.len()
        )));
    }
    // The percentile window depends only on the batch size, so check it up front.
    let batch = cfg.train.batch_size.min(train.len());
    select_k(&vec![1.0; batch], &loss_cfg).map_err(|e| TrainError::Config(e.to_string()))?;
    let alpha = match cfg.pretrain_alpha {
        Some(a) if a > 0.0 && a.is_finite() => a / splits.scaling.target_std,
        Some(a) => {
            return Err(TrainError::Config(format!(
                "eim.pretrain_alpha must be positive, got {a}"
            )))
        }
        // One training-target standard deviation.
        None => 1.0,
    };

    let y = train.targets();
    let mut net = init_network(&cfg.net, train.dim(), 2, derive_seed(seed, 0))?;
    let mut log = TrainingLog::default();
    if cfg.pretrain.epochs > 0 {
        fit(
            &mut net,
            train.features(),
            &cfg.pretrain,
            derive_seed(seed, 1),
            false,
            "pretrain",
            &mut log,
            |out, idx| Ok(pretrain_loss(out, y.select(Axis(0), idx).view(), alpha)?.into()),
        )?;
    }
    fit(
        &mut net,
        train.features(),
        &cfg.train,
        derive_seed(seed, 2),
        true,
        "eim",
        &mut log,
        |out, idx| {
            let yb = y.select(Axis(0), idx);
            let covered = out
                .axis_iter(Axis(0))
                .zip(yb.iter())
                .filter(|(row, &t)| row[0].min(row[1]) <= t && t <= row[0].max(row[1]))
                .count();
            let e = eim_loss(out, yb.view(), &loss_cfg)?;
            Ok(StepLoss {
                k_b: Some(e.k_b),
                batch_picp: Some(covered as f64 / idx.len() as f64),
                value: e.into(),
            })
        },
    )?;

    let mut model = TrainedIntervalModel::from_parts(
        Predictor::Eim { net },
        splits.scaling.clone(),
        Some(target),
        seed,
        snapshot(cfg)?,
    );
    model.calibrate(&splits.calibration, target)?;
    Ok(Trained {
        model,
        log,
        search: Vec::new(),
    })
}
