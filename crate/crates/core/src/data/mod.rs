//! Datasets, ingestion, synthetic generators, splits and minibatching.
//!
//! A [`Dataset`] holds features and targets in natural units. Standardization
//! parameters are fitted on the training split ([`Scaling::fit`]) and applied
//! by the estimators, so that reported interval widths stay in target units.

mod batch;
mod csv;
mod split;
mod synthetic;

pub use self::batch::{minibatch_indices, minibatches, Minibatch};
pub use self::csv::{
    load_csv, load_msd_csv, write_csv, CsvOptions, LoadReport, MSD_FEATURES, MSD_YEAR_RANGE,
};
pub use self::split::{
    split, split_msd_standard, subsample, SplitSpec, Splits, MSD_TEST_ROWS, MSD_TOTAL_ROWS,
};
pub use self::synthetic::{generate_synthetic, SyntheticKind, SyntheticOracle, SyntheticSpec};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Feature matrix and target vector with a provenance tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    targets: Array1<f64>,
    scaling: Option<Scaling>,
    provenance: String,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        targets: Array1<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self, DataError> {
        if features.nrows() != targets.len() {
            return Err(DataError::Format(format!(
                "{} feature rows for {} targets",
                features.nrows(),
                targets.len()
            )));
        }
        if let Some(i) = (0..targets.len())
            .find(|&i| !targets[i].is_finite() || features.row(i).iter().any(|v| !v.is_finite()))
        {
            return Err(DataError::Format(format!("non-finite value in row {i}")));
        }
        Ok(Self {
            features,
            targets,
            scaling: None,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn targets(&self) -> ArrayView1<'_, f64> {
        self.targets.view()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Scaling applied to this dataset, if it is in standardized units.
    pub fn scaling(&self) -> Option<&Scaling> {
        self.scaling.as_ref()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            targets: self.targets.select(Axis(0), indices),
            scaling: self.scaling.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Contiguous rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            features: self.features.slice(ndarray::s![start..end, ..]).to_owned(),
            targets: self.targets.slice(ndarray::s![start..end]).to_owned(),
            scaling: self.scaling.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// This dataset in standardized units under `scaling`.
    pub fn standardized(&self, scaling: &Scaling) -> Result<Dataset, DataError> {
        if self.scaling.is_some() {
            return Err(DataError::Config("dataset is already standardized".into()));
        }
        Ok(Dataset {
            features: scaling.standardize_features(self.features.view())?,
            targets: self.targets.mapv(|y| scaling.standardize_target(y)),
            scaling: Some(scaling.clone()),
            provenance: self.provenance.clone(),
        })
    }

    /// Inverse of [`Dataset::standardized`].
    pub fn unstandardized(&self) -> Result<Dataset, DataError> {
        let scaling = self
            .scaling
            .as_ref()
            .ok_or_else(|| DataError::Config("dataset is not standardized".into()))?;
        Ok(Dataset {
            features: scaling.unstandardize_features(self.features.view())?,
            targets: self.targets.mapv(|y| scaling.unstandardize_target(y)),
            scaling: None,
            provenance: self.provenance.clone(),
        })
    }

    /// Population standard deviation of the targets.
    pub fn target_std(&self) -> f64 {
        self.targets.std(0.0)
    }
}

/// Per-column mean/std for features and the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

// Columns with (near-)zero spread are centred but not rescaled.
fn usable_std(s: f64) -> f64 {
    if s > 1e-12 {
        s
    } else {
        1.0
    }
}

impl Scaling {
    pub fn fit(data: &Dataset) -> Result<Self, DataError> {
        if data.is_empty() {
            return Err(DataError::Config(
                "cannot fit scaling on an empty dataset".into(),
            ));
        }
        let feature_mean = data.features.mean_axis(Axis(0)).unwrap().to_vec();
        let feature_std = data
            .features
            .std_axis(Axis(0), 0.0)
            .iter()
            .map(|&s| usable_std(s))
            .collect();
        Ok(Self {
            feature_mean,
            feature_std,
            target_mean: data.targets.mean().unwrap(),
            target_std: usable_std(data.targets.std(0.0)),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            feature_mean: vec![0.0; dim],
            feature_std: vec![1.0; dim],
            target_mean: 0.0,
            target_std: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.feature_mean.len()
    }

    fn check_dim(&self, x: &ArrayView2<f64>) -> Result<(), DataError> {
        if x.ncols() != self.dim() {
            return Err(DataError::Format(format!(
                "expected {} feature columns, got {}",
                self.dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn standardize_features(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, DataError> {
        self.check_dim(&x)?;
        let mut out = x.to_owned();
        for (j, mut column) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.feature_mean[j], self.feature_std[j]);
            column.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    pub fn unstandardize_features(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, DataError> {
        self.check_dim(&x)?;
        let mut out = x.to_owned();
        for (j, mut column) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.feature_mean[j], self.feature_std[j]);
            column.mapv_inplace(|v| v * s + m);
        }
        Ok(out)
    }

    #[inline]
    pub fn standardize_target(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_std
    }

    #[inline]
    pub fn unstandardize_target(&self, y: f64) -> f64 {
        y * self.target_std + self.target_mean
    }
}
