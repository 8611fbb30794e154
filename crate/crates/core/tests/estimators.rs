//! Properties of the trained pipelines on small synthetic problems.

use ndarray::{Array1, Array2};
use nnpi::data::{generate_synthetic, split, SyntheticOracle};
use nnpi::estimators::{
    train_eim, train_ensemble, train_fixed, train_mle, train_quantile, EimTrainConfig,
    EnsembleConfig, FixedConfig, MleConfig, NetConfig, QuantileConfig, TrainConfig, TrainError,
};
use nnpi::metrics::{mpiw, picp};
use nnpi::nn::OptimizerKind;
use nnpi::stats::two_sided_z;
use nnpi::{Dataset, SplitSpec, Splits, SyntheticKind, SyntheticSpec, TrainedIntervalModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn synthetic(kind: SyntheticKind, n: usize) -> (Splits, SyntheticOracle) {
    let (data, oracle) = generate_synthetic(&SyntheticSpec {
        kind,
        n,
        ..SyntheticSpec::default()
    })
    .unwrap();
    (split(&data, &SplitSpec::default()).unwrap(), oracle)
}

fn small_net() -> NetConfig {
    NetConfig {
        hidden: vec![16],
        ..NetConfig::default()
    }
}

fn quick(epochs: usize, batch_size: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size,
        ..TrainConfig::default()
    }
}

fn small_ensemble() -> EnsembleConfig {
    EnsembleConfig {
        net: small_net(),
        train: quick(3, 128),
        noise_train: quick(3, 128),
        members: 4,
        groups: 2,
        resamples: 200,
    }
}

fn small_eim() -> EimTrainConfig {
    EimTrainConfig {
        net: small_net(),
        pretrain: quick(2, 256),
        train: quick(5, 256),
        ..EimTrainConfig::default()
    }
}

fn calibration_picp(model: &TrainedIntervalModel, splits: &Splits, t: f64) -> f64 {
    picp(&model.predict_batch(&splits.calibration, t).unwrap())
}

#[test]
fn every_method_hits_the_calibration_target() {
    let (splits, _) = synthetic(SyntheticKind::GaussianHeteroscedastic, 4000);
    let n = splits.calibration.len() as f64;
    let targets = [0.7, 0.8, 0.9];
    let mut models = vec![
        train_fixed(
            &splits,
            &FixedConfig {
                net: small_net(),
                ..FixedConfig::default()
            },
            1,
            &targets,
        )
        .unwrap()
        .model,
        train_mle(
            &splits,
            &MleConfig {
                net: small_net(),
                train: quick(3, 128),
            },
            1,
            &targets,
        )
        .unwrap()
        .model,
        train_ensemble(&splits, &small_ensemble(), 1, &targets)
            .unwrap()
            .model,
    ];
    for &t in &targets {
        models.push(train_eim(&splits, &small_eim(), t, 1).unwrap().model);
    }
    for m in &models {
        for c in &m.calibration {
            let p = calibration_picp(m, &splits, c.target);
            assert!(
                p >= c.target && p <= c.target + 1.0 / n + 1e-12,
                "{} at {}: {p}",
                m.method(),
                c.target
            );
        }
    }
}

#[test]
fn pipelines_are_deterministic() {
    let (splits, _) = synthetic(SyntheticKind::ExponentialAsymmetric, 2000);
    let a = train_ensemble(&splits, &small_ensemble(), 5, &[0.8]).unwrap();
    let b = train_ensemble(&splits, &small_ensemble(), 5, &[0.8]).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.log, b.log);
    let a = train_eim(&splits, &small_eim(), 0.8, 5).unwrap();
    let b = train_eim(&splits, &small_eim(), 0.8, 5).unwrap();
    assert_eq!(a.model, b.model);
    let c = train_eim(&splits, &small_eim(), 0.8, 6).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn symmetric_methods_center_on_their_point_prediction() {
    let (splits, _) = synthetic(SyntheticKind::ExponentialAsymmetric, 2000);
    let x = splits.test.features();
    let models = [
        train_fixed(
            &splits,
            &FixedConfig {
                net: small_net(),
                ..FixedConfig::default()
            },
            2,
            &[0.8],
        )
        .unwrap()
        .model,
        train_mle(
            &splits,
            &MleConfig {
                net: small_net(),
                train: quick(2, 128),
            },
            2,
            &[0.8],
        )
        .unwrap()
        .model,
        train_ensemble(&splits, &small_ensemble(), 2, &[0.8])
            .unwrap()
            .model,
    ];
    for m in &models {
        let f = m.point_predictions(x).unwrap().unwrap();
        for (iv, f) in m.predict_intervals(x, 0.8).unwrap().iter().zip(&f) {
            assert!(iv.lower <= iv.upper);
            assert!(
                (iv.midpoint() - f).abs() <= 1e-9 * (1.0 + f.abs()),
                "{}",
                m.method()
            );
        }
    }
}

#[test]
fn eim_learns_asymmetric_intervals() {
    let (splits, oracle) = synthetic(SyntheticKind::ExponentialAsymmetric, 20_000);
    let t = 0.8;
    let cfg = EimTrainConfig {
        net: NetConfig {
            hidden: vec![32, 32],
            ..NetConfig::default()
        },
        ..EimTrainConfig::default()
    };
    let model = train_eim(&splits, &cfg, t, 3).unwrap().model;
    let x = splits.test.features();
    let ivs = model.predict_intervals(x, t).unwrap();
    let (mut above, mut below) = (0.0, 0.0);
    for (iv, row) in ivs.iter().zip(x.rows()) {
        // Conditional mean of the target.
        let mid = oracle.mean_function(row.as_slice().unwrap());
        above += iv.upper - mid;
        below += mid - iv.lower;
    }
    let n = ivs.len() as f64;
    let width = ivs.iter().map(|iv| iv.width()).sum::<f64>() / n;
    let gap = (above / n - below / n).abs();
    assert!(gap > 0.1 * width, "gap {gap} vs MPIW {width}");
}

#[test]
fn mle_recovers_unit_noise_with_constant_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let y: Array1<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let data = Dataset::new(Array2::zeros((n, 1)), y, "unit-normal").unwrap();
    let splits = split(&data, &SplitSpec::default()).unwrap();
    let model = train_mle(
        &splits,
        &MleConfig {
            net: small_net(),
            train: quick(5, 128),
        },
        0,
        &[0.9],
    )
    .unwrap()
    .model;
    let iv = model
        .raw_intervals(Array2::zeros((1, 1)).view(), 0.9)
        .unwrap()[0];
    let half = 0.5 * iv.width();
    let sigma = half / two_sided_z(0.9);
    assert!((sigma - 1.0).abs() < 0.1, "sigma {sigma}");
    assert!((half - 1.6449).abs() < 0.17, "halfwidth {half}");
}

#[test]
fn pretraining_alone_fits_the_fixed_band() {
    let n = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Array2::from_shape_fn((n, 2), |_| rand::Rng::random_range(&mut rng, -1.0..1.0));
    let data = Dataset::new(x, Array1::from_elem(n, 7.0), "constant").unwrap();
    let splits = split(&data, &SplitSpec::default()).unwrap();
    let cfg = EimTrainConfig {
        net: small_net(),
        pretrain: TrainConfig {
            epochs: 60,
            batch_size: 128,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        },
        train: quick(0, 128),
        pretrain_alpha: Some(0.5),
        ..EimTrainConfig::default()
    };
    let model = train_eim(&splits, &cfg, 0.8, 0).unwrap().model;
    for iv in model.raw_intervals(splits.test.features(), 0.8).unwrap() {
        assert!(
            (iv.lower - 6.5).abs() < 0.05 && (iv.upper - 7.5).abs() < 0.05,
            "{iv:?}"
        );
    }
}

#[test]
fn eim_beats_fixed_bands_under_heteroscedastic_noise() {
    let (splits, _) = synthetic(SyntheticKind::GaussianHeteroscedastic, 20_000);
    let t = 0.9;
    let net = NetConfig {
        hidden: vec![32, 32],
        ..NetConfig::default()
    };
    let eim = train_eim(
        &splits,
        &EimTrainConfig {
            net: net.clone(),
            ..EimTrainConfig::default()
        },
        t,
        4,
    )
    .unwrap()
    .model;
    let fixed = train_fixed(
        &splits,
        &FixedConfig {
            net,
            ..FixedConfig::default()
        },
        4,
        &[t],
    )
    .unwrap()
    .model;
    let e = mpiw(&eim.predict_batch(&splits.test, t).unwrap());
    let f = mpiw(&fixed.predict_batch(&splits.test, t).unwrap());
    assert!(e < f, "eim {e} vs fixed {f}");
}

#[test]
fn quantile_search_never_loses_to_the_naive_pair() {
    let (splits, _) = synthetic(SyntheticKind::GaussianHomoscedastic, 5000);
    let t = 0.9;
    let cfg = QuantileConfig {
        net: small_net(),
        train: quick(3, 128),
        search_epochs: 1,
        grid_step: 0.15,
        ..QuantileConfig::default()
    };
    let trained = train_quantile(&splits, &cfg, t, 0).unwrap();
    let naive = trained
        .search
        .iter()
        .find(|s| (s.tau_lower - 0.05).abs() < 1e-12 && (s.tau_upper - 0.95).abs() < 1e-12)
        .expect("naive pair is on the grid");
    let best = trained
        .search
        .iter()
        .map(|s| s.validation_mpiw)
        .fold(f64::INFINITY, f64::min);
    assert!(best <= naive.validation_mpiw);
    let m = &trained.model;
    let p = calibration_picp(m, &splits, t);
    assert!(p >= t && p <= t + 1.0 / splits.calibration.len() as f64);
}

#[test]
fn single_pair_grid_selects_that_pair() {
    let (splits, _) = synthetic(SyntheticKind::Bimodal, 1000);
    let cfg = QuantileConfig {
        net: small_net(),
        train: quick(1, 128),
        search_epochs: 1,
        grid_min: 0.1,
        grid_max: 0.9,
        grid_step: 0.8,
    };
    let trained = train_quantile(&splits, &cfg, 0.8, 0).unwrap();
    assert_eq!(trained.search.len(), 1);
    match trained.model.predictor {
        nnpi::estimators::Predictor::Quantile {
            tau_lower,
            tau_upper,
            ..
        } => {
            assert_eq!((tau_lower, tau_upper), (0.1, 0.9));
        }
        ref other => panic!("unexpected predictor {other:?}"),
    }
}

#[test]
fn divergence_reports_phase_and_step() {
    let (splits, _) = synthetic(SyntheticKind::GaussianHomoscedastic, 1000);
    let cfg = FixedConfig {
        net: small_net(),
        train: TrainConfig {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 1e6,
            epochs: 50,
            batch_size: 32,
        },
        ..FixedConfig::default()
    };
    match train_fixed(&splits, &cfg, 0, &[0.9]) {
        Err(TrainError::Divergence { phase, step }) => {
            assert_eq!(phase, "fixed");
            assert!(step < 50 * 19);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn eim_rejects_small_batches_and_empty_windows() {
    let (splits, _) = synthetic(SyntheticKind::GaussianHomoscedastic, 1000);
    let mut cfg = small_eim();
    cfg.train.batch_size = 50;
    assert!(matches!(
        train_eim(&splits, &cfg, 0.8, 0),
        Err(TrainError::Config(_))
    ));
    let mut cfg = small_eim();
    cfg.min_batch = 10;
    cfg.train.batch_size = 10;
    cfg.delta = 0.5;
    assert!(matches!(
        train_eim(&splits, &cfg, 0.8, 0),
        Err(TrainError::Config(_))
    ));
}
