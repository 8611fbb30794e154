use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Calibration, Method, Predictor, TrainError, TrainedIntervalModel};
use crate::data::Scaling;
use crate::nn::{load_network, save_network};

/// File name of the bundle manifest.
pub const BUNDLE_MANIFEST: &str = "manifest.toml";
pub const BUNDLE_VERSION: u32 = 1;

// Seeds use the full u64 range, which TOML integers cannot hold, so they are
// stored as decimal strings.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    method: Method,
    seed: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trained_target: Option<f64>,
    networks: Vec<String>,
    scaling: Scaling,
    params: Params,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    #[serde(default)]
    config: toml::Table,
    #[serde(default)]
    calibration: Vec<Calibration>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    groups: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resamples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resample_seed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau_lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau_upper: Option<f64>,
}

fn bad(msg: impl Into<String>) -> TrainError {
    TrainError::Bundle(msg.into())
}

fn parse_seed(s: &str, what: &str) -> Result<u64, TrainError> {
    s.parse()
        .map_err(|_| bad(format!("{what} `{s}` is not an unsigned integer")))
}

/// Writes `model` as a bundle directory at `dir`, creating it if needed.
pub fn save_bundle(model: &TrainedIntervalModel, dir: &Path) -> Result<(), TrainError> {
    fs::create_dir_all(dir)?;
    let mut params = Params::default();
    match &model.predictor {
        Predictor::Fixed { alpha, .. } => params.alpha = Some(*alpha),
        Predictor::Ensemble {
            groups,
            resamples,
            resample_seed,
            ..
        } => {
            params.groups = Some(*groups);
            params.resamples = Some(*resamples);
            params.resample_seed = Some(resample_seed.to_string());
        }
        Predictor::Quantile {
            tau_lower,
            tau_upper,
            ..
        } => {
            params.tau_lower = Some(*tau_lower);
            params.tau_upper = Some(*tau_upper);
        }
        Predictor::Mle { .. } | Predictor::Eim { .. } => {}
    }
    let nets = model.predictor.networks();
    let mut names = Vec::with_capacity(nets.len());
    for (i, net) in nets.iter().enumerate() {
        let name = format!("net-{i:03}.nnpi");
        save_network(net, &dir.join(&name))?;
        names.push(name);
    }
    let manifest = Manifest {
        format_version: BUNDLE_VERSION,
        method: model.method(),
        seed: model.seed.to_string(),
        trained_target: model.trained_target,
        networks: names,
        scaling: model.scaling.clone(),
        params,
        metadata: model.metadata.clone(),
        config: model.config.clone(),
        calibration: model.calibration.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| bad(format!("manifest encoding: {e}")))?;
    fs::write(dir.join(BUNDLE_MANIFEST), text)?;
    Ok(())
}

/// Reads a bundle directory written by [`save_bundle`].
pub fn load_bundle(dir: &Path) -> Result<TrainedIntervalModel, TrainError> {
    let path = dir.join(BUNDLE_MANIFEST);
    let text = fs::read_to_string(&path)?;
    let m: Manifest = toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    if m.format_version != BUNDLE_VERSION {
        return Err(bad(format!(
            "unsupported bundle version {} (expected {BUNDLE_VERSION})",
            m.format_version
        )));
    }
    let mut nets = m
        .networks
        .iter()
        .map(|name| {
            if name.contains('/') || name.contains('\\') || name.starts_with('.') {
                return Err(bad(format!("invalid network file name `{name}`")));
            }
            Ok(load_network(&dir.join(name))?)
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let expect = |count: usize| -> Result<(), TrainError> {
        if nets.len() != count {
            return Err(bad(format!(
                "{} bundle lists {} networks, expected {count}",
                m.method,
                nets.len()
            )));
        }
        Ok(())
    };
    let missing = |what: &str| bad(format!("{} bundle is missing params.{what}", m.method));
    let p = &m.params;
    let predictor = match m.method {
        Method::Fixed => {
            expect(1)?;
            Predictor::Fixed {
                net: nets.remove(0),
                alpha: p.alpha.ok_or_else(|| missing("alpha"))?,
            }
        }
        Method::Mle => {
            expect(2)?;
            let variance = nets.pop().unwrap();
            Predictor::Mle {
                mean: nets.pop().unwrap(),
                variance,
            }
        }
        Method::Ensemble => {
            let groups = p.groups.ok_or_else(|| missing("groups"))?;
            if nets.len() < 2 || groups == 0 || (nets.len() - 1) % groups != 0 {
                return Err(bad(format!(
                    "ensemble bundle has {} networks for {groups} groups",
                    nets.len()
                )));
            }
            let noise = nets.pop().unwrap();
            Predictor::Ensemble {
                members: nets,
                groups,
                resamples: p.resamples.ok_or_else(|| missing("resamples"))?,
                resample_seed: parse_seed(
                    p.resample_seed
                        .as_deref()
                        .ok_or_else(|| missing("resample_seed"))?,
                    "resample_seed",
                )?,
                noise,
            }
        }
        Method::Quantile => {
            expect(1)?;
            Predictor::Quantile {
                net: nets.remove(0),
                tau_lower: p.tau_lower.ok_or_else(|| missing("tau_lower"))?,
                tau_upper: p.tau_upper.ok_or_else(|| missing("tau_upper"))?,
            }
        }
        Method::Eim => {
            expect(1)?;
            Predictor::Eim {
                net: nets.remove(0),
            }
        }
    };
    let arity_ok = match &predictor {
        Predictor::Quantile { net, .. } | Predictor::Eim { net } => net.output_arity() == 2,
        other => other.networks().iter().all(|n| n.output_arity() == 1),
    };
    let width_ok = predictor
        .networks()
        .iter()
        .all(|n| n.input_width() == m.scaling.dim());
    if !arity_ok || !width_ok {
        return Err(bad(
            "network shapes do not match the bundle method and scaling",
        ));
    }
    Ok(TrainedIntervalModel {
        predictor,
        scaling: m.scaling,
        trained_target: m.trained_target,
        calibration: m.calibration,
        seed: parse_seed(&m.seed, "seed")?,
        config: m.config,
        metadata: m.metadata,
    })
}
