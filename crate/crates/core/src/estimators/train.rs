use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{NetConfig, TrainConfig, TrainError, TrainedIntervalModel};
use crate::data::{minibatch_indices, Dataset, Splits};
use crate::losses::{LossError, LossValue};
use crate::nn::{Network, Optimizer, Tape};

/// Mixes a base seed with a stream id (splitmix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One optimisation step.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub phase: String,
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    /// Minibatch scale factor (EIM phase only).
    pub k_b: Option<f64>,
    /// Unscaled minibatch coverage (EIM phase only).
    pub batch_picp: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<LogRecord>,
}

impl TrainingLog {
    pub fn extend(&mut self, other: TrainingLog) {
        self.records.extend(other.records);
    }

    /// CSV rendering: `phase,epoch,step,loss,k_b,batch_picp`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,epoch,step,loss,k_b,batch_picp\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.phase,
                r.epoch,
                r.step,
                r.loss,
                opt(r.k_b),
                opt(r.batch_picp)
            ));
        }
        out
    }
}

/// Loss evaluated on one minibatch.
pub(crate) struct StepLoss {
    pub value: LossValue,
    pub k_b: Option<f64>,
    pub batch_picp: Option<f64>,
}

impl From<LossValue> for StepLoss {
    fn from(value: LossValue) -> Self {
        Self {
            value,
            k_b: None,
            batch_picp: None,
        }
    }
}

/// Training split in standardized units.
pub(crate) fn standardized_train(splits: &Splits) -> Result<Dataset, TrainError> {
    if splits.train.is_empty() {
        return Err(TrainError::Config("training split is empty".into()));
    }
    Ok(splits.train.standardized(&splits.scaling)?)
}

/// Calibrates `model` on the calibration split for every target in `targets`.
pub(crate) fn calibrate_all(
    model: &mut TrainedIntervalModel,
    splits: &Splits,
    targets: &[f64],
) -> Result<(), TrainError> {
    for &t in targets {
        model.calibrate(&splits.calibration, t)?;
    }
    Ok(())
}

pub(crate) fn init_network(
    net: &NetConfig,
    input: usize,
    output_arity: usize,
    seed: u64,
) -> Result<Network, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Network::mlp(
        input,
        &net.hidden,
        net.activation,
        output_arity,
        &mut rng,
    )?)
}

/// Sets the output-layer biases, leaving weights untouched.
pub(crate) fn set_output_bias(net: &mut Network, values: &[f64]) {
    let last = net.layers_mut().last_mut().unwrap();
    for (b, &v) in last.biases.iter_mut().zip(values) {
        *b = v;
    }
}

/// Minibatch training of `net` on rows of `features`.
///
/// `loss` receives the batch outputs and the row indices of the batch. The
/// summed loss gradient is divided by the batch size, so learning rates do not
/// depend on it.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fit<F>(
    net: &mut Network,
    features: ArrayView2<f64>,
    cfg: &TrainConfig,
    seed: u64,
    drop_short: bool,
    phase: &str,
    log: &mut TrainingLog,
    mut loss: F,
) -> Result<(), TrainError>
where
    F: FnMut(ArrayView2<f64>, &[usize]) -> Result<StepLoss, LossError>,
{
    cfg.validate(phase)?;
    let n = features.nrows();
    let batch_size = cfg.batch_size.min(n);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate)?;
    let mut tape = Tape::new();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        for idx in minibatch_indices(n, batch_size, seed, epoch as u64, drop_short)? {
            let x: Array2<f64> = features.select(Axis(0), &idx);
            let outputs = net.forward_recorded(x.view(), &mut tape)?;
            let StepLoss {
                value,
                k_b,
                batch_picp,
            } = loss(outputs.view(), &idx).map_err(|source| TrainError::Loss {
                phase: phase.to_string(),
                step,
                source,
            })?;
            if !value.loss.is_finite() || value.gradient.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::Divergence {
                    phase: phase.to_string(),
                    step,
                });
            }
            let mut gradient = value.gradient;
            gradient /= idx.len() as f64;
            let grads = net.backward(&tape, gradient.view())?;
            opt.step(net, &grads)?;
            log.records.push(LogRecord {
                phase: phase.to_string(),
                epoch,
                step,
                loss: value.loss,
                k_b,
                batch_picp,
            });
            step += 1;
        }
    }
    Ok(())
}
