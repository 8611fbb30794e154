use ndarray::{Array1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::snapshot;
use super::train::{
    calibrate_all, derive_seed, fit, init_network, set_output_bias, standardized_train,
};
use super::{MleConfig, Predictor, TrainError, Trained, TrainedIntervalModel, TrainingLog};
use crate::data::Splits;
use crate::losses::{mle_variance_loss, mse_loss};

/// Mean and variance networks trained on disjoint halves of the training split.
///
/// The split is the first and second half of a seeded shuffle. The mean network
/// fits half A; its squared residuals on half B are the regression targets of
/// the variance network.
pub fn train_mle(
    splits: &Splits,
    cfg: &MleConfig,
    seed: u64,
    targets: &[f64],
) -> Result<Trained, TrainError> {
    let train = standardized_train(splits)?;
    if train.len() < 2 {
        return Err(TrainError::Config(format!(
            "mle needs at least 2 training rows, got {}",
            train.len()
        )));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 0)));
    let half = train.len() / 2;
    let part_a = train.select(&order[..half]);
    let part_b = train.select(&order[half..]);

    let mut log = TrainingLog::default();
    let mut mean = init_network(&cfg.net, train.dim(), 1, derive_seed(seed, 1))?;
    let ya = part_a.targets();
    fit(
        &mut mean,
        part_a.features(),
        &cfg.train,
        derive_seed(seed, 2),
        false,
        "mle_mean",
        &mut log,
        |out, idx| Ok(mse_loss(out, ya.select(Axis(0), idx).view())?.into()),
    )?;

    let predicted = mean.forward(part_b.features())?;
    let r2: Array1<f64> = part_b
        .targets()
        .iter()
        .zip(predicted.column(0))
        .map(|(y, f)| (y - f) * (y - f))
        .collect();
    let mut variance = init_network(&cfg.net, train.dim(), 1, derive_seed(seed, 3))?;
    let start = r2.mean().unwrap_or(1.0).max(crate::losses::RESIDUAL_FLOOR);
    set_output_bias(&mut variance, &[start.ln()]);
    fit(
        &mut variance,
        part_b.features(),
        &cfg.train,
        derive_seed(seed, 4),
        false,
        "mle_variance",
        &mut log,
        |out, idx| Ok(mle_variance_loss(out, r2.select(Axis(0), idx).view())?.into()),
    )?;

    let mut model = TrainedIntervalModel::from_parts(
        Predictor::Mle { mean, variance },
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
