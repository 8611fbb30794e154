use ndarray::Axis;

use super::model::snapshot;
use super::train::{calibrate_all, derive_seed, fit, init_network, standardized_train};
use super::{FixedConfig, Predictor, TrainError, Trained, TrainedIntervalModel, TrainingLog};
use crate::data::Splits;
use crate::losses::mse_loss;

/// Point regression with a `±alpha` relative band, calibrated for each of `targets`.
pub fn train_fixed(
    splits: &Splits,
    cfg: &FixedConfig,
    seed: u64,
    targets: &[f64],
) -> Result<Trained, TrainError> {
    if !(cfg.alpha > 0.0 && cfg.alpha.is_finite()) {
        return Err(TrainError::Config(format!(
            "fixed.alpha must be positive, got {}",
            cfg.alpha
        )));
    }
    let train = standardized_train(splits)?;
    let y = train.targets();
    let mut net = init_network(&cfg.net, train.dim(), 1, derive_seed(seed, 0))?;
    let mut log = TrainingLog::default();
    fit(
        &mut net,
        train.features(),
        &cfg.train,
        derive_seed(seed, 1),
        false,
        "fixed",
        &mut log,
        |out, idx| Ok(mse_loss(out, y.select(Axis(0), idx).view())?.into()),
    )?;
    let mut model = TrainedIntervalModel::from_parts(
        Predictor::Fixed {
            net,
            alpha: cfg.alpha,
        },
        splits.scaling.clone(),
        None,
        seed,
        snapshot(cfg)?,
    );
    calibrate_all(&mut model, splits, targets)?;
    Ok(Trained {
        model,
        log,
        search: Vec::new(),
    })
}
