//! Training losses and their gradients with respect to network outputs.
//!
//! Every loss is a sum over the batch (not a mean). Interval losses read
//! column 0 of the output matrix as the lower bound `l(x)` and column 1 as the
//! upper bound `u(x)`.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Widths below this are treated as degenerate intervals.
pub const DEGENERATE_WIDTH: f64 = 1e-12;

/// Lower clamp for ensemble noise residuals `r² = (y − f)² − σ²_model`.
pub const RESIDUAL_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("degenerate interval at sample {index}: width {width:e}")]
    DegenerateInterval { index: usize, width: f64 },
    #[error("no sample falls inside the ±{delta} percentile-point window around the {target} percentile of a batch of {n}")]
    EmptyWindow { n: usize, target: f64, delta: f64 },
    #[error("batch of {n} is below the EIM minimum of {min}")]
    BatchTooSmall { n: usize, min: usize },
    #[error("invalid EIM configuration: {0}")]
    Config(String),
}

/// Scalar loss plus its gradient w.r.t. every network output.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub gradient: Array2<f64>,
}

fn check_shape(outputs: &ArrayView2<f64>, n: usize, arity: usize) -> Result<(), LossError> {
    if outputs.ncols() != arity {
        return Err(LossError::Shape(format!(
            "expected {arity} output column(s), got {}",
            outputs.ncols()
        )));
    }
    if outputs.nrows() != n {
        return Err(LossError::Shape(format!(
            "{} output rows for {n} targets",
            outputs.nrows()
        )));
    }
    if n == 0 {
        return Err(LossError::Shape("empty batch".into()));
    }
    Ok(())
}

/// `Σ (y − f(x))²`.
pub fn mse_loss(
    outputs: ArrayView2<f64>,
    targets: ArrayView1<f64>,
) -> Result<LossValue, LossError> {
    check_shape(&outputs, targets.len(), 1)?;
    let mut gradient = Array2::zeros(outputs.raw_dim());
    let mut loss = 0.0;
    for i in 0..targets.len() {
        let e = targets[i] - outputs[[i, 0]];
        loss += e * e;
        gradient[[i, 0]] = -2.0 * e;
    }
    Ok(LossValue { loss, gradient })
}

/// `Σ (r² − var(x))²` where the network emits `log var(x)`.
pub fn mle_variance_loss(
    log_var_outputs: ArrayView2<f64>,
    squared_residuals: ArrayView1<f64>,
) -> Result<LossValue, LossError> {
    check_shape(&log_var_outputs, squared_residuals.len(), 1)?;
    let mut gradient = Array2::zeros(log_var_outputs.raw_dim());
    let mut loss = 0.0;
    for i in 0..squared_residuals.len() {
        let var = log_var_outputs[[i, 0]].exp();
        let e = squared_residuals[i] - var;
        loss += e * e;
        gradient[[i, 0]] = -2.0 * e * var;
    }
    Ok(LossValue { loss, gradient })
}

/// Gaussian negative log-likelihood of the noise residuals:
/// `Σ ½·log(2π σ²) + r² / (2σ²)` with `σ² = exp(output)`.
///
/// Residuals are clamped below at [`RESIDUAL_FLOOR`].
pub fn ensemble_noise_loss(
    log_var_outputs: ArrayView2<f64>,
    residuals_sq: ArrayView1<f64>,
) -> Result<LossValue, LossError> {
    check_shape(&log_var_outputs, residuals_sq.len(), 1)?;
    let half_log_two_pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut gradient = Array2::zeros(log_var_outputs.raw_dim());
    let mut loss = 0.0;
    for i in 0..residuals_sq.len() {
        let s = log_var_outputs[[i, 0]];
        let r2 = residuals_sq[i].max(RESIDUAL_FLOOR);
        let scaled = r2 * (-s).exp();
        loss += half_log_two_pi + 0.5 * s + 0.5 * scaled;
        gradient[[i, 0]] = 0.5 - 0.5 * scaled;
    }
    Ok(LossValue { loss, gradient })
}

/// Pinball loss `L_τ(e) = τe` for `e ≥ 0`, `(τ − 1)e` otherwise.
#[inline]
pub fn pinball(tau: f64, e: f64) -> f64 {
    if e >= 0.0 {
        tau * e
    } else {
        (tau - 1.0) * e
    }
}

/// `Σ L_{τ_l}(y − l(x)) + Σ L_{τ_u}(y − u(x))`; subgradient 0 at a zero residual.
pub fn pinball_loss(
    outputs: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    tau_lower: f64,
    tau_upper: f64,
) -> Result<LossValue, LossError> {
    check_shape(&outputs, targets.len(), 2)?;
    if !(0.0 < tau_lower && tau_lower < tau_upper && tau_upper < 1.0) {
        return Err(LossError::Shape(format!(
            "quantiles must satisfy 0 < τ_l < τ_u < 1, got ({tau_lower}, {tau_upper})"
        )));
    }
    let d = |tau: f64, e: f64| {
        if e > 0.0 {
            -tau
        } else if e < 0.0 {
            1.0 - tau
        } else {
            0.0
        }
    };
    let mut gradient = Array2::zeros(outputs.raw_dim());
    let mut loss = 0.0;
    for i in 0..targets.len() {
        let el = targets[i] - outputs[[i, 0]];
        let eu = targets[i] - outputs[[i, 1]];
        loss += pinball(tau_lower, el) + pinball(tau_upper, eu);
        gradient[[i, 0]] = d(tau_lower, el);
        gradient[[i, 1]] = d(tau_upper, eu);
    }
    Ok(LossValue { loss, gradient })
}

/// `Σ (y − α − l(x))² + Σ (y + α − u(x))²`.
pub fn pretrain_loss(
    outputs: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    alpha: f64,
) -> Result<LossValue, LossError> {
    check_shape(&outputs, targets.len(), 2)?;
    let mut gradient = Array2::zeros(outputs.raw_dim());
    let mut loss = 0.0;
    for i in 0..targets.len() {
        let el = targets[i] - alpha - outputs[[i, 0]];
        let eu = targets[i] + alpha - outputs[[i, 1]];
        loss += el * el + eu * eu;
        gradient[[i, 0]] = -2.0 * el;
        gradient[[i, 1]] = -2.0 * eu;
    }
    Ok(LossValue { loss, gradient })
}

/// Smallest midpoint-preserving expansion factor that makes `[lower, upper]`
/// contain `y`: `|(u + l − 2y) / (u − l)|`.
#[inline]
pub fn expansion_factor(lower: f64, upper: f64, y: f64) -> f64 {
    ((upper + lower - 2.0 * y) / (upper - lower)).abs()
}

/// Per-sample expansion factors `k_i` for a batch of `(lower, upper)` outputs.
pub fn eim_k_factors(
    outputs: ArrayView2<f64>,
    targets: ArrayView1<f64>,
) -> Result<Vec<f64>, LossError> {
    check_shape(&outputs, targets.len(), 2)?;
    (0..targets.len())
        .map(|i| {
            let (l, u) = (outputs[[i, 0]], outputs[[i, 1]]);
            let width = (u - l).abs();
            if width < DEGENERATE_WIDTH {
                return Err(LossError::DegenerateInterval { index: i, width });
            }
            Ok(expansion_factor(l, u, targets[i]))
        })
        .collect()
}

/// 0-based index of the nearest-rank percentile `⌈T·n⌉` in ascending order.
pub fn nearest_rank_index(n: usize, target: f64) -> usize {
    debug_assert!(n > 0);
    // T·n is often an integer that picks up rounding noise (0.7·10 = 7.000000000000001).
    let rank = (target * n as f64 - 1e-9).ceil().max(1.0) as usize;
    rank.min(n) - 1
}

/// Order of `values` ascending, ties broken by original index.
pub fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// How `k_B` is chosen from the minibatch expansion factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSelection {
    /// Mean of every `k_i` whose rank percentile lies within `δ` of `T`.
    Window,
    /// The single nearest-rank `T`-th percentile (the `δ → 0` limit).
    NearestRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EimConfig {
    /// Target coverage `T` in (0, 1).
    pub target: f64,
    /// Window half-width in percentile points.
    pub delta: f64,
    pub selection: KSelection,
    /// Stop gradients through `k_B`; only the width sum is differentiated.
    pub detach_k: bool,
    pub min_batch: usize,
}

impl EimConfig {
    pub fn new(target: f64) -> Self {
        Self {
            target,
            delta: 2.0,
            selection: KSelection::Window,
            detach_k: false,
            min_batch: 100,
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(LossError::Config(format!(
                "target must lie in (0, 1), got {}",
                self.target
            )));
        }
        if self.selection == KSelection::Window {
            let limit = self.target.min(1.0 - self.target) * 100.0;
            if !(self.delta > 0.0 && self.delta < limit) {
                return Err(LossError::Config(format!(
                    "delta must lie in (0, {limit}) percentile points, got {}",
                    self.delta
                )));
            }
        }
        Ok(())
    }
}

/// Indices of the `k_i` that enter `k_B`, in ascending `k` order.
pub fn select_k(k: &[f64], cfg: &EimConfig) -> Result<Vec<usize>, LossError> {
    let n = k.len();
    let order = ascending_order(k);
    match cfg.selection {
        KSelection::NearestRank => Ok(vec![order[nearest_rank_index(n, cfg.target)]]),
        KSelection::Window => {
            let centre = cfg.target * 100.0;
            let selected: Vec<usize> = order
                .iter()
                .enumerate()
                .filter(|(rank, _)| {
                    let pct = (*rank as f64 + 0.5) / n as f64 * 100.0;
                    (pct - centre).abs() <= cfg.delta + 1e-9
                })
                .map(|(_, &i)| i)
                .collect();
            if selected.is_empty() {
                return Err(LossError::EmptyWindow {
                    n,
                    target: cfg.target,
                    delta: cfg.delta,
                });
            }
            Ok(selected)
        }
    }
}

/// Result of [`eim_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct EimLoss {
    pub loss: f64,
    pub gradient: Array2<f64>,
    /// Minibatch scaling factor.
    pub k_b: f64,
    /// Samples whose `k_i` entered `k_B`.
    pub selected: Vec<usize>,
}

impl From<EimLoss> for LossValue {
    fn from(e: EimLoss) -> Self {
        LossValue {
            loss: e.loss,
            gradient: e.gradient,
        }
    }
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Expanded interval minimization loss `k_B · Σ |u(x) − l(x)|`.
///
/// Gradients flow through the width sum and, unless `detach_k` is set,
/// through every selected `k_i`.
pub fn eim_loss(
    outputs: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    cfg: &EimConfig,
) -> Result<EimLoss, LossError> {
    cfg.validate()?;
    let n = targets.len();
    if n < cfg.min_batch {
        return Err(LossError::BatchTooSmall {
            n,
            min: cfg.min_batch,
        });
    }
    let k = eim_k_factors(outputs, targets)?;
    let selected = select_k(&k, cfg)?;
    let m = selected.len() as f64;
    let k_b = selected.iter().map(|&i| k[i]).sum::<f64>() / m;
    let total_width: f64 = (0..n)
        .map(|i| (outputs[[i, 1]] - outputs[[i, 0]]).abs())
        .sum();

    let mut gradient = Array2::zeros(outputs.raw_dim());
    for i in 0..n {
        let s = sign(outputs[[i, 1]] - outputs[[i, 0]]);
        gradient[[i, 0]] = -k_b * s;
        gradient[[i, 1]] = k_b * s;
    }
    if !cfg.detach_k {
        for &i in &selected {
            let (l, u, y) = (outputs[[i, 0]], outputs[[i, 1]], targets[i]);
            let w = u - l;
            let a = u + l - 2.0 * y;
            let s = sign(a / w) * total_width / (m * w * w);
            gradient[[i, 0]] += s * (w + a);
            gradient[[i, 1]] += s * (w - a);
        }
    }
    Ok(EimLoss {
        loss: k_b * total_width,
        gradient,
        k_b,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2, Array1};
    use proptest::prelude::*;

    fn col(v: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap()
    }

    #[test]
    fn mse_examples() {
        let y = arr1(&[1.0, 2.0]);
        assert_eq!(
            mse_loss(col(&[1.0, 2.0]).view(), y.view()).unwrap().loss,
            0.0
        );
        assert_eq!(
            mse_loss(col(&[0.0, 0.0]).view(), y.view()).unwrap().loss,
            5.0
        );
        let g = mse_loss(col(&[0.0]).view(), arr1(&[3.0]).view())
            .unwrap()
            .gradient;
        assert_eq!(g[[0, 0]], -6.0);
    }

    #[test]
    fn mse_rejects_wrong_arity() {
        let err = mse_loss(Array2::zeros((2, 2)).view(), arr1(&[1.0, 2.0]).view()).unwrap_err();
        assert!(matches!(err, LossError::Shape(_)));
    }

    #[test]
    fn mle_variance_examples() {
        let r2 = arr1(&[0.3, 2.0]);
        let exact = col(&[0.3f64.ln(), 2.0f64.ln()]);
        assert!(mle_variance_loss(exact.view(), r2.view()).unwrap().loss < 1e-28);
        let l = mle_variance_loss(col(&[0.0]).view(), arr1(&[4.0]).view())
            .unwrap()
            .loss;
        assert_eq!(l, 9.0);
        let l = mle_variance_loss(col(&[0.0, 0.0]).view(), arr1(&[0.0, 0.0]).view())
            .unwrap()
            .loss;
        assert_eq!(l, 2.0);
    }

    #[test]
    fn noise_loss_at_unit_variance() {
        // independent route: −log of the normal density at r = 0 with σ = 1
        let density = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let l = ensemble_noise_loss(col(&[0.0]).view(), arr1(&[0.0]).view())
            .unwrap()
            .loss;
        assert!((l - (-density.ln())).abs() < 1e-8);
        assert!((l - 0.9189385).abs() < 1e-6);
    }

    #[test]
    fn noise_loss_minimised_at_residual() {
        for &v in &[0.01, 0.5, 3.0] {
            let r2 = arr1(&[v]);
            let at = |s: f64| ensemble_noise_loss(col(&[s]).view(), r2.view()).unwrap();
            let best = at(v.ln());
            let expected = 0.5 * (2.0 * std::f64::consts::PI * v).ln() + 0.5;
            assert!((best.loss - expected).abs() < 1e-12);
            assert!(best.gradient[[0, 0]].abs() < 1e-12);
            assert!(at(v.ln() + 0.1).loss > best.loss);
            assert!(at(v.ln() - 0.1).loss > best.loss);
        }
    }

    #[test]
    fn noise_loss_clamps_negative_residuals() {
        let a = ensemble_noise_loss(col(&[0.2]).view(), arr1(&[-5.0]).view()).unwrap();
        let b = ensemble_noise_loss(col(&[0.2]).view(), arr1(&[RESIDUAL_FLOOR]).view()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pinball_examples() {
        assert!((pinball(0.9, 1.0) - 0.9).abs() < 1e-15);
        assert!((pinball(0.9, -1.0) - 0.1).abs() < 1e-15);
        let out = arr2(&[[0.0, 0.0], [1.0, 1.0]]);
        let y = arr1(&[2.0, -1.0]);
        let l = pinball_loss(out.view(), y.view(), 0.5 - 1e-12, 0.5 + 1e-12)
            .unwrap()
            .loss;
        // τ ≈ 0.5: half absolute error on each column
        assert!((l - (0.5 * (2.0 + 2.0) * 2.0)).abs() < 1e-9);
    }

    #[test]
    fn pinball_constant_minimiser_is_the_80th_percentile() {
        // brute-force scan of a constant predictor over y ∈ {1..100}
        let ys: Vec<f64> = (1..=100).map(f64::from).collect();
        let loss = |q: f64| ys.iter().map(|&y| pinball(0.8, y - q)).sum::<f64>();
        let mut best = (f64::INFINITY, 0.0);
        for step in 0..=10_000 {
            let q = step as f64 * 0.01;
            let l = loss(q);
            if l < best.0 - 1e-12 {
                best = (l, q);
            }
        }
        assert!((80.0..=81.0).contains(&best.1), "minimiser {}", best.1);
    }

    #[test]
    fn pretrain_examples() {
        let y = arr1(&[5.0]);
        let exact = arr2(&[[4.0, 6.0]]);
        assert_eq!(
            pretrain_loss(exact.view(), y.view(), 1.0).unwrap().loss,
            0.0
        );
        let v = pretrain_loss(arr2(&[[0.0, 0.0]]).view(), y.view(), 1.0).unwrap();
        assert_eq!(v.loss, 52.0);
        assert_eq!(v.gradient[[0, 0]], -8.0);
        assert_eq!(v.gradient[[0, 1]], -12.0);
    }

    /// Smallest c with y inside midpoint ± c·halfwidth, by bisection.
    fn bisect_k(l: f64, u: f64, y: f64) -> f64 {
        let (mid, hw) = ((l + u) / 2.0, (u - l).abs() / 2.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        while (y - mid).abs() > hi * hw {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let c = 0.5 * (lo + hi);
            if (y - mid).abs() <= c * hw {
                hi = c;
            } else {
                lo = c;
            }
        }
        hi
    }

    #[test]
    fn k_factor_examples() {
        let out = arr2(&[[0.0, 2.0], [0.0, 2.0], [1.0, 3.0]]);
        let k = eim_k_factors(out.view(), arr1(&[1.0, 2.0, 0.0]).view()).unwrap();
        assert_eq!(k, vec![0.0, 1.0, 2.0]);
        assert!((bisect_k(1.0, 3.0, 0.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_interval_reports_index() {
        let out = arr2(&[[0.0, 2.0], [1.0, 1.0]]);
        let err = eim_k_factors(out.view(), arr1(&[1.0, 1.0]).view()).unwrap_err();
        assert!(matches!(
            err,
            LossError::DegenerateInterval { index: 1, .. }
        ));
    }

    #[test]
    fn nearest_rank_indices() {
        assert_eq!(nearest_rank_index(5, 0.8), 3);
        assert_eq!(nearest_rank_index(10, 0.7), 6);
        assert_eq!(nearest_rank_index(10, 1.0), 9);
        assert_eq!(nearest_rank_index(3, 0.01), 0);
    }

    fn batch_with_k(k: &[f64]) -> (Array2<f64>, Array1<f64>) {
        // width 2 around midpoint 1; y = 1 + k puts the target at expansion factor k
        let out = Array2::from_shape_fn((k.len(), 2), |(_, j)| if j == 0 { 0.0 } else { 2.0 });
        let y = Array1::from_iter(k.iter().map(|&k| 1.0 + k));
        (out, y)
    }

    #[test]
    fn eim_nearest_rank_worked_example() {
        let (out, y) = batch_with_k(&[2.0, 0.2, 1.4, 0.5, 1.0]);
        let cfg = EimConfig {
            selection: KSelection::NearestRank,
            min_batch: 1,
            ..EimConfig::new(0.8)
        };
        let r = eim_loss(out.view(), y.view(), &cfg).unwrap();
        assert!((r.k_b - 1.4).abs() < 1e-15);
        assert!((r.loss - 14.0).abs() < 1e-12);
        assert_eq!(r.selected, vec![2]);
        // brute force: scaling by 1.4 covers exactly 4 of 5 targets
        let covered = y.iter().filter(|&&y| (y - 1.0).abs() <= 1.4).count();
        assert_eq!(covered, 4);
    }

    #[test]
    fn eim_zero_when_targets_at_midpoints() {
        let (out, y) = batch_with_k(&[0.0; 200]);
        let r = eim_loss(out.view(), y.view(), &EimConfig::new(0.9)).unwrap();
        assert_eq!(r.k_b, 0.0);
        assert_eq!(r.loss, 0.0);
    }

    #[test]
    fn eim_small_batch_and_empty_window() {
        let (out, y) = batch_with_k(&[0.5; 5]);
        let err = eim_loss(out.view(), y.view(), &EimConfig::new(0.8)).unwrap_err();
        assert!(matches!(err, LossError::BatchTooSmall { n: 5, min: 100 }));
        let cfg = EimConfig {
            min_batch: 1,
            ..EimConfig::new(0.8)
        };
        let err = eim_loss(out.view(), y.view(), &cfg).unwrap_err();
        assert!(matches!(err, LossError::EmptyWindow { .. }));
    }

    #[test]
    fn eim_config_bounds() {
        assert!(EimConfig::new(0.0).validate().is_err());
        assert!(EimConfig::new(1.0).validate().is_err());
        let wide = EimConfig {
            delta: 10.0,
            ..EimConfig::new(0.95)
        };
        assert!(wide.validate().is_err());
        assert!(EimConfig::new(0.9).validate().is_ok());
    }

    #[test]
    fn window_selects_ranks_near_target() {
        let k: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let sel = select_k(&k, &EimConfig::new(0.8)).unwrap();
        // rank percentiles (r − 0.5) within [78, 82] → ranks 79..=82
        assert_eq!(sel, vec![78, 79, 80, 81]);
    }

    #[test]
    fn detached_gradient_only_has_width_terms() {
        let (out, y) = batch_with_k(&(0..100).map(|i| i as f64 / 50.0).collect::<Vec<_>>());
        let cfg = EimConfig {
            detach_k: true,
            ..EimConfig::new(0.8)
        };
        let r = eim_loss(out.view(), y.view(), &cfg).unwrap();
        for i in 0..100 {
            assert_eq!(r.gradient[[i, 0]], -r.k_b);
            assert_eq!(r.gradient[[i, 1]], r.k_b);
        }
    }

    proptest! {
        #[test]
        fn k_factor_is_minimal_cover(l in -10.0f64..10.0, w in 0.01f64..5.0, y in -20.0f64..20.0) {
            let u = l + w;
            let k = expansion_factor(l, u, y);
            let (mid, hw) = ((l + u) / 2.0, w / 2.0);
            prop_assert!((y - mid).abs() <= k * hw * (1.0 + 1e-12) + 1e-12);
            if k > 1e-6 {
                prop_assert!((y - mid).abs() > (k - 1e-9) * hw);
            }
        }

        #[test]
        fn pinball_nonnegative_and_zero_only_at_zero(
            e in proptest::collection::vec(-5.0f64..5.0, 1..20), tau in 0.01f64..0.49
        ) {
            let out = Array2::zeros((e.len(), 2));
            let y = Array1::from(e.clone());
            let l = pinball_loss(out.view(), y.view(), tau, tau + 0.5).unwrap().loss;
            prop_assert!(l >= 0.0);
            prop_assert_eq!(l == 0.0, e.iter().all(|&v| v == 0.0));
        }
    }
}
