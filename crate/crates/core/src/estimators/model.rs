use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};

use super::{Method, TrainError};
use crate::data::{Dataset, Scaling};
use crate::metrics::{calibrate_k, Interval, IntervalBatch};
use crate::nn::Network;
use crate::stats::two_sided_z;

/// Per-row centers and half-widths.
type CentersAndHalfwidths = (Vec<f64>, Vec<f64>);

/// Coverage targets closer than this are treated as the same target.
const TARGET_TOLERANCE: f64 = 1e-12;

/// Calibrated scale factor for one coverage target.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Calibration {
    pub target: f64,
    pub k: f64,
}

/// Method-specific networks. All networks work in standardized units.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    /// Point regression, band of `±alpha·f(x)`.
    Fixed { net: Network, alpha: f64 },
    /// Mean network and log-variance network.
    Mle { mean: Network, variance: Network },
    /// Bootstrap members (grouped contiguously) plus a log noise-variance network.
    Ensemble {
        members: Vec<Network>,
        groups: usize,
        resamples: usize,
        resample_seed: u64,
        noise: Network,
    },
    /// Dual-output network predicting the `tau_lower` and `tau_upper` quantiles.
    Quantile {
        net: Network,
        tau_lower: f64,
        tau_upper: f64,
    },
    /// Dual-output `(l, u)` network.
    Eim { net: Network },
}

impl Predictor {
    pub fn method(&self) -> Method {
        match self {
            Predictor::Fixed { .. } => Method::Fixed,
            Predictor::Mle { .. } => Method::Mle,
            Predictor::Ensemble { .. } => Method::Ensemble,
            Predictor::Quantile { .. } => Method::Quantile,
            Predictor::Eim { .. } => Method::Eim,
        }
    }

    /// Every network, in a fixed order used by the bundle format.
    pub fn networks(&self) -> Vec<&Network> {
        match self {
            Predictor::Fixed { net, .. }
            | Predictor::Quantile { net, .. }
            | Predictor::Eim { net } => {
                vec![net]
            }
            Predictor::Mle { mean, variance } => vec![mean, variance],
            Predictor::Ensemble { members, noise, .. } => {
                members.iter().chain(std::iter::once(noise)).collect()
            }
        }
    }
}

/// A trained interval model together with its calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedIntervalModel {
    pub predictor: Predictor,
    /// Scaling fitted on the training split.
    pub scaling: Scaling,
    /// Coverage target the networks were trained or tuned for, if any.
    pub trained_target: Option<f64>,
    pub calibration: Vec<Calibration>,
    pub seed: u64,
    /// Snapshot of the configuration used for training.
    pub config: toml::Table,
    pub metadata: BTreeMap<String, String>,
}

fn single_column(net: &Network, x: ArrayView2<f64>) -> Result<Vec<f64>, TrainError> {
    Ok(net.forward(x)?.column(0).to_vec())
}

/// Sample variance (divisor `n − 1`).
pub(crate) fn sample_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values
        .clone()
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n < 2 {
        return 0.0;
    }
    let mean = sum / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
}

/// Ensemble mean and bootstrap model variance for each row (standardized units).
pub(crate) fn ensemble_moments(
    members: &[Network],
    groups: usize,
    resample_index: &[Vec<usize>],
    x: ArrayView2<f64>,
) -> Result<(Vec<f64>, Vec<f64>), TrainError> {
    let n = x.nrows();
    let outputs: Vec<Vec<f64>> = members
        .iter()
        .map(|m| single_column(m, x))
        .collect::<Result<_, _>>()?;
    let per_group = members.len() / groups;
    let mut mean = vec![0.0; n];
    let mut variance = vec![0.0; n];
    let mut group_means = vec![0.0; groups];
    for i in 0..n {
        mean[i] = outputs.iter().map(|o| o[i]).sum::<f64>() / members.len() as f64;
        for (g, gm) in group_means.iter_mut().enumerate() {
            *gm = outputs[g * per_group..(g + 1) * per_group]
                .iter()
                .map(|o| o[i])
                .sum::<f64>()
                / per_group as f64;
        }
        variance[i] = super::ensemble::bootstrap_model_variance(&group_means, resample_index);
    }
    Ok((mean, variance))
}

impl TrainedIntervalModel {
    pub fn method(&self) -> Method {
        self.predictor.method()
    }

    fn standardized_inputs(&self, features: ArrayView2<f64>) -> Result<Array2<f64>, TrainError> {
        Ok(self.scaling.standardize_features(features)?)
    }

    /// Center and half-width per row for symmetric methods, in natural units.
    fn symmetric_parts(
        &self,
        features: ArrayView2<f64>,
        target: f64,
    ) -> Result<Option<CentersAndHalfwidths>, TrainError> {
        let x = self.standardized_inputs(features)?;
        let s = &self.scaling;
        let parts = match &self.predictor {
            Predictor::Fixed { net, alpha } => {
                let f: Vec<f64> = single_column(net, x.view())?
                    .into_iter()
                    .map(|v| s.unstandardize_target(v))
                    .collect();
                let h = f.iter().map(|v| alpha * v).collect();
                (f, h)
            }
            Predictor::Mle { mean, variance } => {
                let z = two_sided_z(target);
                let f = single_column(mean, x.view())?;
                let lv = single_column(variance, x.view())?;
                (
                    f.into_iter().map(|v| s.unstandardize_target(v)).collect(),
                    lv.into_iter()
                        .map(|v| z * (0.5 * v).exp() * s.target_std)
                        .collect(),
                )
            }
            Predictor::Ensemble {
                members,
                groups,
                resamples,
                resample_seed,
                noise,
            } => {
                let z = two_sided_z(target);
                let index = super::resample_indices(*groups, *resamples, *resample_seed);
                let (f, model_var) = ensemble_moments(members, *groups, &index, x.view())?;
                let noise_lv = single_column(noise, x.view())?;
                (
                    f.into_iter().map(|v| s.unstandardize_target(v)).collect(),
                    model_var
                        .iter()
                        .zip(&noise_lv)
                        .map(|(mv, lv)| z * (mv + lv.exp()).sqrt() * s.target_std)
                        .collect(),
                )
            }
            Predictor::Quantile { .. } | Predictor::Eim { .. } => return Ok(None),
        };
        Ok(Some(parts))
    }

    /// Point predictions of the symmetric methods, in natural units.
    pub fn point_predictions(
        &self,
        features: ArrayView2<f64>,
    ) -> Result<Option<Vec<f64>>, TrainError> {
        Ok(self.symmetric_parts(features, 0.5)?.map(|(f, _)| f))
    }

    /// Unscaled intervals in natural units.
    ///
    /// `target` sets the normal multiplier of the variance-based methods and is
    /// ignored by the others.
    pub fn raw_intervals(
        &self,
        features: ArrayView2<f64>,
        target: f64,
    ) -> Result<Vec<Interval>, TrainError> {
        if let Some((f, h)) = self.symmetric_parts(features, target)? {
            return Ok(f
                .iter()
                .zip(&h)
                .map(|(&f, &h)| Interval::ordered(f - h, f + h))
                .collect());
        }
        let x = self.standardized_inputs(features)?;
        let net = match &self.predictor {
            Predictor::Quantile { net, .. } | Predictor::Eim { net } => net,
            _ => unreachable!("symmetric methods handled above"),
        };
        let out = net.forward(x.view())?;
        let s = &self.scaling;
        Ok(out
            .axis_iter(Axis(0))
            .map(|row| {
                Interval::ordered(
                    s.unstandardize_target(row[0]),
                    s.unstandardize_target(row[1]),
                )
            })
            .collect())
    }

    /// Raw intervals on `data` paired with its targets.
    pub fn raw_batch(&self, data: &Dataset, target: f64) -> Result<IntervalBatch, TrainError> {
        let natural;
        let data = if data.scaling().is_some() {
            natural = data.unstandardized()?;
            &natural
        } else {
            data
        };
        let intervals = self.raw_intervals(data.features(), target)?;
        Ok(IntervalBatch::new(intervals, data.targets().to_vec())?)
    }

    /// Stored `k` for `target`, if calibrated.
    pub fn calibration_k(&self, target: f64) -> Option<f64> {
        self.calibration
            .iter()
            .find(|c| (c.target - target).abs() <= TARGET_TOLERANCE)
            .map(|c| c.k)
    }

    /// Fits `k` on `data` for `target` and stores it, replacing any previous value.
    pub fn calibrate(&mut self, data: &Dataset, target: f64) -> Result<f64, TrainError> {
        let batch = self.raw_batch(data, target)?;
        let k = calibrate_k(&batch, target)?;
        self.calibration
            .retain(|c| (c.target - target).abs() > TARGET_TOLERANCE);
        self.calibration.push(Calibration { target, k });
        self.calibration
            .sort_by(|a, b| a.target.total_cmp(&b.target));
        Ok(k)
    }

    /// Calibrates for `target` unless a `k` is already stored.
    pub fn ensure_calibrated(&mut self, data: &Dataset, target: f64) -> Result<f64, TrainError> {
        match self.calibration_k(target) {
            Some(k) => Ok(k),
            None => self.calibrate(data, target),
        }
    }

    /// Calibrated intervals in natural units.
    pub fn predict_intervals(
        &self,
        features: ArrayView2<f64>,
        target: f64,
    ) -> Result<Vec<Interval>, TrainError> {
        let k = self
            .calibration_k(target)
            .ok_or(TrainError::Uncalibrated(target))?;
        Ok(self
            .raw_intervals(features, target)?
            .iter()
            .map(|iv| iv.scaled(k))
            .collect())
    }

    /// Calibrated intervals on `data` paired with its targets.
    pub fn predict_batch(&self, data: &Dataset, target: f64) -> Result<IntervalBatch, TrainError> {
        let k = self
            .calibration_k(target)
            .ok_or(TrainError::Uncalibrated(target))?;
        Ok(crate::metrics::scale_intervals(
            &self.raw_batch(data, target)?,
            k,
        ))
    }

    pub(crate) fn from_parts(
        predictor: Predictor,
        scaling: Scaling,
        trained_target: Option<f64>,
        seed: u64,
        config: toml::Table,
    ) -> Self {
        Self {
            predictor,
            scaling,
            trained_target,
            calibration: Vec::new(),
            seed,
            config,
            metadata: BTreeMap::new(),
        }
    }
}

/// Serializes a config struct into a TOML table for the model snapshot.
pub(crate) fn snapshot<T: serde::Serialize>(cfg: &T) -> Result<toml::Table, TrainError> {
    toml::Table::try_from(cfg).map_err(|e| TrainError::Config(format!("config snapshot: {e}")))
}
