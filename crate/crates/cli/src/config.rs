//! Run configuration file.

use std::path::{Path, PathBuf};

use nnpi::data::{SplitSpec, SyntheticSpec};
use nnpi::estimators::{EimTrainConfig, EnsembleConfig, FixedConfig, MleConfig, QuantileConfig};
use nnpi::Method;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Msd,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// CSV file for the `msd` and `csv` sources.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Target column of a generic CSV file.
    pub target_column: usize,
    pub has_header: bool,
    /// Use the producers' MSD train/test split instead of `[split]`.
    pub msd_standard_split: bool,
    /// Seeded row subsample taken before splitting.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    pub synthetic: SyntheticSpec,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            path: None,
            target_column: 0,
            has_header: false,
            msd_standard_split: false,
            subsample: None,
            synthetic: SyntheticSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramConfig {
    pub bins: usize,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self { bins: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub methods: Vec<Method>,
    /// Report whether each EIM model is best at its own target.
    pub diagonal_check: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            diagonal_check: true,
        }
    }
}

/// Everything a run needs. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for initialisation, shuffling and resampling during training.
    pub seed: u64,
    /// Coverage targets.
    pub targets: Vec<f64>,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub data: DataConfig,
    pub split: SplitSpec,
    pub histogram: HistogramConfig,
    pub compare: CompareConfig,
    pub fixed: FixedConfig,
    pub mle: MleConfig,
    pub ensemble: EnsembleConfig,
    pub quantile: QuantileConfig,
    pub eim: EimTrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            targets: vec![0.7, 0.8, 0.9],
            output_dir: PathBuf::from("nnpi-out"),
            threads: 0,
            data: DataConfig::default(),
            split: SplitSpec::default(),
            histogram: HistogramConfig::default(),
            compare: CompareConfig::default(),
            fixed: FixedConfig::default(),
            mle: MleConfig::default(),
            ensemble: EnsembleConfig::default(),
            quantile: QuantileConfig::default(),
            eim: EimTrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a config, rejecting unknown keys. Errors name the key path.
    ///
    /// The file is merged key by key over the defaults, so a partial table
    /// such as `[eim.pretrain]` keeps the method's own defaults for the keys
    /// it leaves out.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let mut merged = toml::Table::try_from(RunConfig::default())
            .map_err(|e| CliError::Config(format!("cannot encode defaults: {e}")))?;
        merge(&mut merged, user);
        let cfg: RunConfig =
            serde_path_to_error::deserialize(toml::Value::Table(merged)).map_err(|e| {
                let path = e.path().to_string();
                CliError::Config(format!("at `{path}`: {}", e.into_inner().message().trim()))
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.targets.is_empty() {
            return Err(CliError::Config("`targets` must not be empty".into()));
        }
        if let Some(t) = self.targets.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(CliError::Config(format!("target {t} is outside (0, 1)")));
        }
        if self.histogram.bins < 2 {
            return Err(CliError::Config(format!(
                "histogram.bins must be at least 2, got {}",
                self.histogram.bins
            )));
        }
        match self.data.source {
            DataSource::Synthetic => {}
            DataSource::Msd | DataSource::Csv if self.data.path.is_none() => {
                return Err(CliError::Config(
                    "data.path is required for file sources".into(),
                ))
            }
            _ => {}
        }
        if self.data.msd_standard_split && self.data.source != DataSource::Msd {
            return Err(CliError::Config(
                "data.msd_standard_split needs data.source = \"msd\"".into(),
            ));
        }
        if self.data.msd_standard_split && self.data.subsample.is_some() {
            return Err(CliError::Config(
                "data.msd_standard_split needs the full file; drop data.subsample".into(),
            ));
        }
        Ok(())
    }

    /// The config as written next to run outputs.
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot encode config: {e}")))
    }
}

/// Overlays `user` onto `base`. A table whose `kind` changes (an optimizer
/// variant, say) replaces the base table instead of merging into it.
fn merge(base: &mut toml::Table, user: toml::Table) {
    for (key, value) in user {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u))
                if u.get("kind").is_none_or(|k| b.get("kind") == Some(k)) =>
            {
                merge(b, u)
            }
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = RunConfig::parse("[eim.train]\nepochz = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("eim.train"), "{msg}");
        assert!(msg.contains("epochz"), "{msg}");
        let err = RunConfig::parse("[ensemble]\nmembers = \"many\"\n").unwrap_err();
        assert!(err.to_string().contains("ensemble.members"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut cfg = RunConfig::parse(
            "seed = 7\ntargets = [0.9]\n[data]\nsource = \"csv\"\npath = \"x.csv\"\n\
             [eim]\npretrain_alpha = 2.5\n[ensemble.train]\noptimizer = { kind = \"sgd_momentum\", momentum = 0.9 }\n",
        )
        .unwrap();
        cfg.data.subsample = Some(100);
        let back = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_tables_keep_method_defaults() {
        let cfg = RunConfig::parse("[eim.pretrain]\nepochs = 60\n").unwrap();
        let want = EimTrainConfig::default();
        assert_eq!(cfg.eim.pretrain.epochs, 60);
        assert_eq!(cfg.eim.pretrain.batch_size, want.pretrain.batch_size);
        assert_eq!(cfg.eim.train, want.train);

        let cfg = RunConfig::parse("[mle.train.optimizer]\nkind = \"sgd\"\n").unwrap();
        assert_eq!(cfg.mle.train.optimizer, nnpi::OptimizerKind::Sgd);
    }

    #[test]
    fn semantic_checks() {
        assert!(RunConfig::parse("targets = []").is_err());
        assert!(RunConfig::parse("targets = [1.0]").is_err());
        assert!(RunConfig::parse("[histogram]\nbins = 1").is_err());
        assert!(RunConfig::parse("[data]\nsource = \"msd\"").is_err());
        assert!(RunConfig::parse("[data]\nsource = \"tsv\"").is_err());
    }
}
