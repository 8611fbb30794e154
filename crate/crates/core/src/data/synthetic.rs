//! Synthetic regression data with known optimal intervals.
//!
//! Features are uniform on `[-1, 1]^d`. Targets are `f*(x) + scale(x)·ε` where
//! `f*` is a smooth fixed function and `ε` has a kind-specific unit
//! distribution. Because the noise law is known, the width-minimal interval
//! reaching any coverage `T` is known for every `x`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};
use crate::metrics::Interval;
use crate::stats::{normal_cdf, two_sided_z};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Gaussian noise with constant standard deviation `noise`.
    GaussianHomoscedastic,
    /// Gaussian noise whose standard deviation grows linearly with the first
    /// feature, from `0.2·noise` at `x₀ = −1` to `2·noise` at `x₀ = 1`.
    GaussianHeteroscedastic,
    /// Mean-zero shifted exponential noise with mean `noise` (rate `1/noise`).
    ExponentialAsymmetric,
    /// Equal mixture of `N(±separation, noise²)`.
    Bimodal,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 4] = [
        SyntheticKind::GaussianHomoscedastic,
        SyntheticKind::GaussianHeteroscedastic,
        SyntheticKind::ExponentialAsymmetric,
        SyntheticKind::Bimodal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::GaussianHomoscedastic => "gaussian_homoscedastic",
            SyntheticKind::GaussianHeteroscedastic => "gaussian_heteroscedastic",
            SyntheticKind::ExponentialAsymmetric => "exponential_asymmetric",
            SyntheticKind::Bimodal => "bimodal",
        }
    }
}

impl std::str::FromStr for SyntheticKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SyntheticKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DataError::Config(format!("unknown synthetic generator `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub d: usize,
    pub noise: f64,
    /// Mode offset for [`SyntheticKind::Bimodal`].
    pub separation: f64,
    /// Constant added to `f*`; keeps targets away from zero.
    pub baseline: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            kind: SyntheticKind::GaussianHomoscedastic,
            n: 50_000,
            d: 4,
            noise: 1.0,
            separation: 2.0,
            baseline: 10.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    pub fn validate(&self) -> Result<(), DataError> {
        if self.n == 0 || self.d == 0 {
            return Err(DataError::Config(
                "synthetic n and d must be positive".into(),
            ));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(DataError::Config(format!(
                "noise must be positive, got {}",
                self.noise
            )));
        }
        if self.kind == SyntheticKind::Bimodal && !(self.separation >= 0.0) {
            return Err(DataError::Config("separation must be non-negative".into()));
        }
        Ok(())
    }
}

/// Ground truth for a synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOracle {
    spec: SyntheticSpec,
}

impl SyntheticOracle {
    pub fn new(spec: SyntheticSpec) -> Result<Self, DataError> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    /// Noise-free regression function `f*(x)`.
    pub fn mean_function(&self, x: &[f64]) -> f64 {
        self.spec.baseline
            + x.iter()
                .enumerate()
                .map(|(j, &v)| ((PI * v).sin() + 0.5 * v) / (j + 1) as f64)
                .sum::<f64>()
    }

    /// Multiplier applied to the unit noise at `x`.
    pub fn noise_scale(&self, x: &[f64]) -> f64 {
        match self.spec.kind {
            SyntheticKind::GaussianHeteroscedastic => self.spec.noise * (0.2 + 0.9 * (x[0] + 1.0)),
            _ => self.spec.noise,
        }
    }

    fn bimodal_offset(&self) -> f64 {
        self.spec.separation / self.spec.noise
    }

    fn unit_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.spec.kind {
            SyntheticKind::GaussianHomoscedastic | SyntheticKind::GaussianHeteroscedastic => {
                StandardNormal.sample(rng)
            }
            SyntheticKind::ExponentialAsymmetric => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
            SyntheticKind::Bimodal => {
                let z: f64 = StandardNormal.sample(rng);
                let m = self.bimodal_offset();
                if rng.random::<bool>() {
                    z + m
                } else {
                    z - m
                }
            }
        }
    }

    /// Draws one target for features `x`.
    pub fn sample_target<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        self.mean_function(x) + self.noise_scale(x) * self.unit_sample(rng)
    }

    /// Draws `n` fresh rows with the generator's feature law.
    pub fn draw(&self, n: usize, seed: u64) -> Result<Dataset, DataError> {
        let d = self.spec.d;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Array2::zeros((n, d));
        let mut targets = Array1::zeros(n);
        let mut x = vec![0.0; d];
        for i in 0..n {
            for v in x.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            targets[i] = self.sample_target(&x, &mut rng);
            features
                .row_mut(i)
                .assign(&ndarray::ArrayView1::from(&x[..]));
        }
        Dataset::new(
            features,
            targets,
            format!("synthetic:{}:seed={seed}", self.spec.kind.name()),
        )
    }

    /// Width-minimal interval of the unit noise reaching coverage `target`.
    pub fn unit_interval(&self, target: f64) -> (f64, f64) {
        match self.spec.kind {
            SyntheticKind::GaussianHomoscedastic | SyntheticKind::GaussianHeteroscedastic => {
                let z = two_sided_z(target);
                (-z, z)
            }
            // decreasing density: the shortest interval starts at the support minimum
            SyntheticKind::ExponentialAsymmetric => (-1.0, -1.0 - (1.0 - target).ln()),
            SyntheticKind::Bimodal => shortest_mixture_interval(self.bimodal_offset(), target),
        }
    }

    pub fn interval(&self, x: &[f64], target: f64) -> Interval {
        let (a, b) = self.unit_interval(target);
        self.place(x, a, b)
    }

    fn place(&self, x: &[f64], a: f64, b: f64) -> Interval {
        let (m, s) = (self.mean_function(x), self.noise_scale(x));
        Interval {
            lower: m + s * a,
            upper: m + s * b,
        }
    }

    /// Oracle intervals for every row of `features`.
    pub fn intervals(&self, features: ArrayView2<f64>, target: f64) -> Vec<Interval> {
        let (a, b) = self.unit_interval(target);
        features
            .rows()
            .into_iter()
            .map(|row| self.place(row.as_slice().expect("row-major features"), a, b))
            .collect()
    }
}

fn mixture_cdf(v: f64, m: f64) -> f64 {
    0.5 * (normal_cdf(v + m) + normal_cdf(v - m))
}

fn mixture_quantile(p: f64, m: f64) -> f64 {
    let (mut lo, mut hi) = (-m - 40.0, m + 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mixture_cdf(mid, m) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Shortest `[a, b]` with mass `target` under `½N(−m, 1) + ½N(m, 1)`.
///
/// Scans the lower tail mass `p ∈ (0, 1 − target)` on a grid, then refines the
/// best cell with golden-section search.
fn shortest_mixture_interval(m: f64, target: f64) -> (f64, f64) {
    let span = 1.0 - target;
    let width = |p: f64| mixture_quantile(p + target, m) - mixture_quantile(p, m);
    const GRID: usize = 2000;
    let step = span / GRID as f64;
    let mut best = (f64::INFINITY, 0.0);
    for i in 1..GRID {
        let p = i as f64 * step;
        let w = width(p);
        if w < best.0 {
            best = (w, p);
        }
    }
    let (mut lo, mut hi) = (
        (best.1 - step).max(1e-15),
        (best.1 + step).min(span - 1e-15),
    );
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = hi - g * (hi - lo);
        let d = lo + g * (hi - lo);
        if width(c) < width(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    let p = 0.5 * (lo + hi);
    (mixture_quantile(p, m), mixture_quantile(p + target, m))
}

/// Draws `spec.n` rows and returns them with the generator's oracle.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, SyntheticOracle), DataError> {
    let oracle = SyntheticOracle::new(*spec)?;
    let data = oracle.draw(spec.n, spec.seed)?;
    Ok((data, oracle))
}
