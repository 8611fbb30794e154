//! Interval quality metrics and holdout calibration.
//!
//! Coverage (PICP) is the fraction of targets inside their interval, bounds
//! inclusive. Width (MPIW) is the mean absolute interval width. Calibration
//! finds the midpoint-preserving scale factor `k` that brings a batch to a
//! target coverage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::losses::{ascending_order, expansion_factor, nearest_rank_index, DEGENERATE_WIDTH};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("{intervals} intervals for {targets} targets")]
    LengthMismatch { intervals: usize, targets: usize },
    #[error("empty interval batch")]
    Empty,
    #[error("coverage target must lie in (0, 1], got {0}")]
    InvalidTarget(f64),
    #[error("degenerate intervals (width < 1e-12) at samples {0:?}")]
    Degenerate(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    /// Builds an interval from two bounds in either order.
    pub fn ordered(a: f64, b: f64) -> Self {
        if a <= b {
            Self { lower: a, upper: b }
        } else {
            Self { lower: b, upper: a }
        }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        (self.upper - self.lower).abs()
    }

    #[inline]
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.upper + self.lower)
    }

    #[inline]
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }

    /// Expands or shrinks about the midpoint so the width is multiplied by `k`.
    #[inline]
    pub fn scaled(&self, k: f64) -> Self {
        let (l, u) = (self.lower, self.upper);
        let spread = k * (u - l).abs();
        Self {
            lower: (u + l - spread) / 2.0,
            upper: (u + l + spread) / 2.0,
        }
    }
}

/// Intervals paired with the targets they are scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBatch {
    intervals: Vec<Interval>,
    targets: Vec<f64>,
}

impl IntervalBatch {
    pub fn new(intervals: Vec<Interval>, targets: Vec<f64>) -> Result<Self, MetricsError> {
        if intervals.len() != targets.len() {
            return Err(MetricsError::LengthMismatch {
                intervals: intervals.len(),
                targets: targets.len(),
            });
        }
        if intervals.is_empty() {
            return Err(MetricsError::Empty);
        }
        Ok(Self { intervals, targets })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn covered_count(&self) -> usize {
        self.intervals
            .iter()
            .zip(&self.targets)
            .filter(|(iv, &y)| iv.contains(y))
            .count()
    }

    /// Per-sample expansion factors `k_i`.
    pub fn expansion_factors(&self) -> Result<Vec<f64>, MetricsError> {
        let degenerate: Vec<usize> = self
            .intervals
            .iter()
            .enumerate()
            .filter(|(_, iv)| iv.width() < DEGENERATE_WIDTH)
            .map(|(i, _)| i)
            .collect();
        if !degenerate.is_empty() {
            return Err(MetricsError::Degenerate(degenerate));
        }
        Ok(self
            .intervals
            .iter()
            .zip(&self.targets)
            .map(|(iv, &y)| expansion_factor(iv.lower, iv.upper, y))
            .collect())
    }
}

/// Prediction interval coverage probability.
pub fn picp(batch: &IntervalBatch) -> f64 {
    batch.covered_count() as f64 / batch.len() as f64
}

/// Mean prediction interval width.
pub fn mpiw(batch: &IntervalBatch) -> f64 {
    batch.intervals.iter().map(Interval::width).sum::<f64>() / batch.len() as f64
}

/// Scales every interval about its midpoint by `k`.
pub fn scale_intervals(batch: &IntervalBatch, k: f64) -> IntervalBatch {
    IntervalBatch {
        intervals: batch.intervals.iter().map(|iv| iv.scaled(k)).collect(),
        targets: batch.targets.clone(),
    }
}

/// Number of covered samples needed to reach coverage `target` on `n` samples.
pub fn required_covered(n: usize, target: f64) -> usize {
    nearest_rank_index(n, target) + 1
}

/// Smallest `k` such that `picp(scale_intervals(batch, k)) ≥ target`.
///
/// Coverage under midpoint scaling is a step function of `k` that steps up at
/// each `k_i`, so the answer is the nearest-rank `target` percentile of the
/// `k_i`. If floating-point rounding in the scaled bounds leaves the boundary
/// sample just outside, `k` is nudged up by single ulps until it is covered.
pub fn calibrate_k(batch: &IntervalBatch, target: f64) -> Result<f64, MetricsError> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(MetricsError::InvalidTarget(target));
    }
    let k = batch.expansion_factors()?;
    let order = ascending_order(&k);
    let need = required_covered(k.len(), target);
    let mut candidate = k[order[need - 1]];
    for _ in 0..64 {
        if scale_intervals(batch, candidate).covered_count() >= need {
            return Ok(candidate);
        }
        candidate = candidate.next_up();
    }
    // Unreachable for finite inputs; fall back to a relative bump.
    Ok(candidate * (1.0 + 1e-12))
}
