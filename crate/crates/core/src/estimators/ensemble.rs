use ndarray::{Array1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::{ensemble_moments, sample_variance, snapshot};
use super::train::{
    calibrate_all, derive_seed, fit, init_network, set_output_bias, standardized_train,
};
use super::{EnsembleConfig, Predictor, TrainError, Trained, TrainedIntervalModel, TrainingLog};
use crate::data::Splits;
use crate::losses::{ensemble_noise_loss, mse_loss, RESIDUAL_FLOOR};

/// `resamples` draws of `groups` indices into `0..groups`, with replacement.
pub fn resample_indices(groups: usize, resamples: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..resamples)
        .map(|_| (0..groups).map(|_| rng.random_range(0..groups)).collect())
        .collect()
}

/// Mean sample variance of `group_means` over the given resamples.
pub fn bootstrap_model_variance(group_means: &[f64], resamples: &[Vec<usize>]) -> f64 {
    if resamples.is_empty() {
        return 0.0;
    }
    resamples
        .iter()
        .map(|r| sample_variance(r.iter().map(|&g| group_means[g])))
        .sum::<f64>()
        / resamples.len() as f64
}

/// Bootstrap ensemble with a separate noise-variance network.
///
/// Members train in parallel; member `m` always sees the same bootstrap sample
/// and seed, so results do not depend on the thread count.
pub fn train_ensemble(
    splits: &Splits,
    cfg: &EnsembleConfig,
    seed: u64,
    targets: &[f64],
) -> Result<Trained, TrainError> {
    cfg.validate()?;
    let train = standardized_train(splits)?;
    let n = train.len();
    let y = train.targets();

    let members: Vec<_> = (0..cfg.members)
        .into_par_iter()
        .map(|m| {
            let member_seed = derive_seed(seed, 1000 + m as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(member_seed);
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let boot = train.select(&sample);
            let yb = boot.targets();
            let mut net = init_network(&cfg.net, train.dim(), 1, derive_seed(member_seed, 1))?;
            let mut log = TrainingLog::default();
            fit(
                &mut net,
                boot.features(),
                &cfg.train,
                derive_seed(member_seed, 2),
                false,
                &format!("ensemble_member_{m}"),
                &mut log,
                |out, idx| Ok(mse_loss(out, yb.select(Axis(0), idx).view())?.into()),
            )?;
            Ok((net, log))
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let mut log = TrainingLog::default();
    let members: Vec<_> = members
        .into_iter()
        .map(|(net, l)| {
            log.extend(l);
            net
        })
        .collect();

    let resample_seed = derive_seed(seed, 1);
    let index = resample_indices(cfg.groups, cfg.resamples, resample_seed);
    let (f_emb, model_var) = ensemble_moments(&members, cfg.groups, &index, train.features())?;
    let r2: Array1<f64> = (0..n)
        .map(|i| (y[i] - f_emb[i]).powi(2) - model_var[i])
        .collect();

    let mut noise = init_network(&cfg.net, train.dim(), 1, derive_seed(seed, 2))?;
    let start = r2.iter().map(|v| v.max(RESIDUAL_FLOOR)).sum::<f64>() / n as f64;
    set_output_bias(&mut noise, &[start.ln()]);
    fit(
        &mut noise,
        train.features(),
        &cfg.noise_train,
        derive_seed(seed, 3),
        false,
        "ensemble_noise",
        &mut log,
        |out, idx| Ok(ensemble_noise_loss(out, r2.select(Axis(0), idx).view())?.into()),
    )?;

    let mut model = TrainedIntervalModel::from_parts(
        Predictor::Ensemble {
            members,
            groups: cfg.groups,
            resamples: cfg.resamples,
            resample_seed,
            noise,
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Scaling;
    use crate::estimators::model::tests::constant_net;
    use ndarray::arr2;

    #[test]
    fn identical_members_have_zero_model_variance() {
        let members: Vec<_> = (0..8).map(|_| constant_net(1, &[2.5])).collect();
        let index = resample_indices(4, 200, 9);
        let (mean, var) =
            ensemble_moments(&members, 4, &index, arr2(&[[0.0], [1.0]]).view()).unwrap();
        assert_eq!(mean, vec![2.5, 2.5]);
        assert_eq!(var, vec![0.0, 0.0]);
    }

    #[test]
    fn two_group_variance_matches_independent_simulation() {
        // Oracle: draw pairs from {1, 3} directly and average their sample variance.
        let mut rng = ChaCha8Rng::seed_from_u64(12345);
        let draws = 200_000;
        let oracle = (0..draws)
            .map(|_| {
                let a = if rng.random::<bool>() { 1.0 } else { 3.0 };
                let b = if rng.random::<bool>() { 1.0 } else { 3.0 };
                let m = 0.5 * (a + b);
                (a - m) * (a - m) + (b - m) * (b - m)
            })
            .sum::<f64>()
            / draws as f64;
        let members = vec![
            constant_net(1, &[0.0]),
            constant_net(1, &[2.0]),
            constant_net(1, &[4.0]),
            constant_net(1, &[2.0]),
        ];
        let index = resample_indices(2, 1000, 3);
        let (mean, var) = ensemble_moments(&members, 2, &index, arr2(&[[0.0]]).view()).unwrap();
        assert_eq!(mean, vec![2.0]);
        assert!(
            (var[0] - oracle).abs() <= 0.15 * oracle,
            "{} vs {oracle}",
            var[0]
        );
    }

    #[test]
    fn invalid_grouping_is_a_config_error() {
        let cfg = EnsembleConfig {
            members: 10,
            groups: 4,
            ..EnsembleConfig::default()
        };
        let data = crate::data::Dataset::new(ndarray::Array2::zeros((8, 1)), Array1::zeros(8), "t")
            .unwrap();
        let splits = Splits {
            train: data.clone(),
            calibration: data.clone(),
            validation: data.clone(),
            test: data,
            scaling: Scaling::identity(1),
        };
        assert!(matches!(
            train_ensemble(&splits, &cfg, 0, &[0.9]),
            Err(TrainError::Config(_))
        ));
    }

    #[test]
    fn resample_indices_are_seeded() {
        assert_eq!(resample_indices(8, 5, 1), resample_indices(8, 5, 1));
        assert_ne!(resample_indices(8, 5, 1), resample_indices(8, 5, 2));
        assert!(resample_indices(8, 50, 1).iter().flatten().all(|&g| g < 8));
    }
}
