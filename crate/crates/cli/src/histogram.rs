//! Coverage-density histograms over the target axis.

use std::fmt::Write as _;

use nnpi::Interval;

use crate::error::CliError;

/// Bin edges over a target range plus the normalized target histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Bins {
    pub edges: Vec<f64>,
    /// Fraction of targets per bin; sums to 1.
    pub target_fraction: Vec<f64>,
}

impl Bins {
    /// `bins` equal-width bins spanning the targets (last bin closed).
    pub fn over(targets: &[f64], bins: usize) -> Result<Self, CliError> {
        if bins < 2 {
            return Err(CliError::Config(format!(
                "need at least 2 bins, got {bins}"
            )));
        }
        if targets.is_empty() {
            return Err(CliError::Data("no targets to bin".into()));
        }
        let (mut lo, mut hi) = targets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| {
                (a.min(y), b.max(y))
            });
        if hi <= lo {
            lo -= 0.5;
            hi += 0.5;
        }
        Ok(Self::with_range(lo, hi, bins, targets))
    }

    pub fn with_range(lo: f64, hi: f64, bins: usize, targets: &[f64]) -> Self {
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + i as f64 * width })
            .collect();
        let mut counts = vec![0usize; bins];
        let mut inside = 0usize;
        for &y in targets {
            if y < lo || y > hi {
                continue;
            }
            let b = (((y - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
            inside += 1;
        }
        let target_fraction = counts
            .iter()
            .map(|&c| {
                if inside == 0 {
                    0.0
                } else {
                    c as f64 / inside as f64
                }
            })
            .collect();
        Self {
            edges,
            target_fraction,
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    /// For each bin center, the fraction of `intervals` containing it,
    /// normalized to unit area over the bins.
    pub fn coverage_density(&self, intervals: &[Interval]) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.len())
            .map(|i| {
                let c = self.center(i);
                intervals.iter().filter(|iv| iv.contains(c)).count() as f64
                    / intervals.len().max(1) as f64
            })
            .collect();
        let area: f64 = raw
            .iter()
            .enumerate()
            .map(|(i, v)| v * (self.edges[i + 1] - self.edges[i]))
            .sum();
        if area > 0.0 {
            raw.iter().map(|v| v / area).collect()
        } else {
            raw
        }
    }
}

/// CSV with one density column per labelled interval set.
pub fn render(
    bins: &Bins,
    columns: &[(String, Vec<f64>)],
    config_fp: &str,
    dataset_fp: &str,
) -> String {
    let mut out = format!("# config_fingerprint={config_fp}\n# dataset_fingerprint={dataset_fp}\n");
    out.push_str("bin_lower,bin_upper,bin_center,target_fraction");
    for (label, _) in columns {
        write!(out, ",{label}").unwrap();
    }
    out.push('\n');
    for i in 0..bins.len() {
        write!(
            out,
            "{},{},{},{}",
            bins.edges[i],
            bins.edges[i + 1],
            bins.center(i),
            bins.target_fraction[i]
        )
        .unwrap();
        for (_, d) in columns {
            write!(out, ",{}", d[i]).unwrap();
        }
        out.push('\n');
    }
    out
}
