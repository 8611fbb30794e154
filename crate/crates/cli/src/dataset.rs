//! Dataset resolution and fingerprints.

use nnpi::data::{
    generate_synthetic, load_csv, load_msd_csv, split, split_msd_standard, subsample, CsvOptions,
    LoadReport,
};
use nnpi::{Dataset, Splits};
use sha2::{Digest, Sha256};

use crate::config::{DataSource, RunConfig};
use crate::error::CliError;

/// Hex digits kept from each SHA-256 fingerprint.
const FINGERPRINT_LEN: usize = 16;

fn short_hash(bytes: &[u8]) -> String {
    let mut s = hex::encode(Sha256::digest(bytes));
    s.truncate(FINGERPRINT_LEN);
    s
}

/// Hash of the exact feature and target values, in row order.
pub fn dataset_fingerprint(data: &Dataset) -> String {
    let mut bytes = Vec::with_capacity(16 + 8 * data.len() * (data.dim() + 1));
    bytes.extend_from_slice(&(data.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&(data.dim() as u64).to_le_bytes());
    for v in data.features().iter().chain(data.targets().iter()) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    short_hash(&bytes)
}

/// Hash of the resolved config, ignoring where outputs go and how many
/// threads run, since neither changes any result.
pub fn config_fingerprint(cfg: &RunConfig) -> Result<String, CliError> {
    let mut c = cfg.clone();
    c.output_dir = Default::default();
    c.threads = 0;
    Ok(short_hash(c.to_toml()?.as_bytes()))
}

/// The dataset a config points at, its splits and its fingerprint.
pub struct Prepared {
    pub data: Dataset,
    pub splits: Splits,
    pub fingerprint: String,
}

fn log_report(what: &str, r: &LoadReport) {
    if r.rejected_non_finite > 0 {
        log::warn!(
            "{what}: rejected {} rows with non-finite values",
            r.rejected_non_finite
        );
    }
    if r.out_of_range_targets > 0 {
        log::warn!(
            "{what}: {} targets outside the expected range",
            r.out_of_range_targets
        );
    }
    log::info!("{what}: loaded {} rows", r.rows);
}

pub fn load_data(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let d = &cfg.data;
    let data = match d.source {
        DataSource::Synthetic => generate_synthetic(&d.synthetic)?.0,
        DataSource::Msd => {
            let path = d.path.as_deref().expect("validated");
            let (data, report) = load_msd_csv(path)?;
            log_report(&path.display().to_string(), &report);
            data
        }
        DataSource::Csv => {
            let path = d.path.as_deref().expect("validated");
            let (data, report) = load_csv(
                path,
                CsvOptions {
                    target_column: d.target_column,
                    has_header: d.has_header,
                },
            )?;
            log_report(&path.display().to_string(), &report);
            data
        }
    };
    match d.subsample {
        Some(n) => Ok(subsample(&data, n, cfg.split.seed)?),
        None => Ok(data),
    }
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let data = load_data(cfg)?;
    let splits = if cfg.data.msd_standard_split {
        split_msd_standard(&data, &cfg.split)?
    } else {
        split(&data, &cfg.split)?
    };
    Ok(Prepared {
        fingerprint: dataset_fingerprint(&data),
        data,
        splits,
    })
}
