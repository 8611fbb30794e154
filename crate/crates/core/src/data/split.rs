use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Scaling};

/// Row count of the full YearPredictionMSD file.
pub const MSD_TOTAL_ROWS: usize = 515_345;
/// Rows at the end of the MSD file reserved for testing by its producers.
pub const MSD_TEST_ROWS: usize = 51_630;

/// Fractions for the train / calibration / validation / test partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub calibration: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.6,
            calibration: 0.1,
            validation: 0.1,
            test: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    fn fractions(&self) -> [f64; 4] {
        [self.train, self.calibration, self.validation, self.test]
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    pub fn validate(&self) -> Result<(), DataError> {
        let f = self.fractions();
        if f.iter().any(|&v| !(v > 0.0)) {
            return Err(DataError::Config(format!(
                "split fractions must all be positive, got {f:?}"
            )));
        }
        let total: f64 = f.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DataError::Config(format!(
                "split fractions must sum to 1, got {total}"
            )));
        }
        Ok(())
    }
}

/// Four disjoint splits and the scaling fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub calibration: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub scaling: Scaling,
}

// Cumulative rounding keeps the sizes summing to n.
fn partition_sizes(n: usize, fractions: &[f64]) -> Vec<usize> {
    let total: f64 = fractions.iter().sum();
    let mut acc = 0.0;
    let mut prev = 0usize;
    fractions
        .iter()
        .map(|f| {
            acc += f / total;
            let end = ((acc * n as f64).round() as usize).min(n);
            let size = end - prev;
            prev = end;
            size
        })
        .collect()
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

fn carve(data: &Dataset, order: &[usize], sizes: &[usize]) -> Result<Vec<Dataset>, DataError> {
    const NAMES: [&str; 4] = ["train", "calibration", "validation", "test"];
    let mut start = 0;
    let mut out = Vec::with_capacity(sizes.len());
    for (i, &size) in sizes.iter().enumerate() {
        if size == 0 {
            return Err(DataError::Config(format!(
                "{} split is empty for {} rows",
                NAMES[i],
                order.len()
            )));
        }
        out.push(data.select(&order[start..start + size]));
        start += size;
    }
    Ok(out)
}

/// `n` rows drawn without replacement, kept in their original order.
pub fn subsample(data: &Dataset, n: usize, seed: u64) -> Result<Dataset, DataError> {
    if n == 0 || n > data.len() {
        return Err(DataError::Config(format!(
            "cannot subsample {n} rows from {}",
            data.len()
        )));
    }
    let mut rows = shuffled(data.len(), seed);
    rows.truncate(n);
    rows.sort_unstable();
    Ok(data.select(&rows))
}

/// Seeded shuffle, then contiguous slicing by `spec` fractions.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<Splits, DataError> {
    spec.validate()?;
    if data.len() < 4 {
        return Err(DataError::Config(format!(
            "need at least 4 rows to split, got {}",
            data.len()
        )));
    }
    let order = shuffled(data.len(), spec.seed);
    let sizes = partition_sizes(data.len(), &spec.fractions());
    let mut parts = carve(data, &order, &sizes)?.into_iter();
    let train = parts.next().unwrap();
    let scaling = Scaling::fit(&train)?;
    Ok(Splits {
        train,
        calibration: parts.next().unwrap(),
        validation: parts.next().unwrap(),
        test: parts.next().unwrap(),
        scaling,
    })
}

/// The MSD producers' split: the last 51,630 rows are the test set.
///
/// Calibration and validation are carved from the shuffled training block in
/// proportion to `spec`; `spec.test` is ignored.
pub fn split_msd_standard(data: &Dataset, spec: &SplitSpec) -> Result<Splits, DataError> {
    spec.validate()?;
    if data.len() != MSD_TOTAL_ROWS {
        return Err(DataError::Config(format!(
            "the standard MSD split needs the full {MSD_TOTAL_ROWS}-row file, got {} rows",
            data.len()
        )));
    }
    let head = MSD_TOTAL_ROWS - MSD_TEST_ROWS;
    let order = shuffled(head, spec.seed);
    let sizes = partition_sizes(head, &[spec.train, spec.calibration, spec.validation]);
    let mut parts = carve(data, &order, &sizes)?.into_iter();
    let train = parts.next().unwrap();
    let scaling = Scaling::fit(&train)?;
    Ok(Splits {
        train,
        calibration: parts.next().unwrap(),
        validation: parts.next().unwrap(),
        test: data.slice_rows(head, MSD_TOTAL_ROWS),
        scaling,
    })
}
