//! Central finite-difference checks of every loss gradient and of network
//! backpropagation.

use ndarray::{Array1, Array2};
use nnpi::losses::{
    eim_loss, ensemble_noise_loss, expansion_factor, mle_variance_loss, mse_loss, pinball_loss,
    pretrain_loss, EimConfig, KSelection, LossError, LossValue,
};
use nnpi::nn::{Activation, Network, Tape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const REL_TOL: f64 = 1e-6;
const INSTANCES: usize = 100;

fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= REL_TOL * analytic.abs().max(numeric.abs()) + 1e-9
}

fn step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

/// Central difference of `f` in output coordinate `(i, j)`.
fn central<F>(outputs: &Array2<f64>, i: usize, j: usize, f: &F) -> (f64, Array2<f64>, Array2<f64>)
where
    F: Fn(&Array2<f64>) -> f64,
{
    let h = step(outputs[[i, j]]);
    let mut plus = outputs.clone();
    plus[[i, j]] += h;
    let mut minus = outputs.clone();
    minus[[i, j]] -= h;
    ((f(&plus) - f(&minus)) / (2.0 * h), plus, minus)
}

/// Row-separable losses: the full-batch gradient of row `i` must match the
/// difference quotient of row `i`'s own loss, which avoids cancellation
/// against the other rows.
fn check_separable<L>(name: &str, outputs: &Array2<f64>, y: &Array1<f64>, loss: L)
where
    L: Fn(&Array2<f64>, &Array1<f64>) -> Result<LossValue, LossError>,
{
    let g = loss(outputs, y).unwrap().gradient;
    for i in 0..outputs.nrows() {
        let row = outputs.slice(ndarray::s![i..i + 1, ..]).to_owned();
        let yi = y.slice(ndarray::s![i..i + 1]).to_owned();
        let f = |o: &Array2<f64>| loss(o, &yi).unwrap().loss;
        for j in 0..outputs.ncols() {
            let (fd, _, _) = central(&row, 0, j, &f);
            assert!(
                close(g[[i, j]], fd),
                "{name} ({i},{j}): analytic {} vs numeric {fd}",
                g[[i, j]]
            );
        }
    }
}

fn normals(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Array1<f64> {
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[test]
fn point_and_variance_losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..INSTANCES {
        let n = rng.random_range(1..20);
        let out = normals(&mut rng, n, 2.0).insert_axis(ndarray::Axis(1));
        let y = normals(&mut rng, n, 3.0);
        check_separable("mse", &out, &y, |o, y| mse_loss(o.view(), y.view()));
        let r2 = y.mapv(|v| v * v + 1e-3);
        check_separable("mle_variance", &out, &r2, |o, r| {
            mle_variance_loss(o.view(), r.view())
        });
        check_separable("ensemble_noise", &out, &r2, |o, r| {
            ensemble_noise_loss(o.view(), r.view())
        });
    }
}

#[test]
fn interval_losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..INSTANCES {
        let n = rng.random_range(1..20);
        let out = Array2::from_shape_fn((n, 2), |_| rng.random_range(-3.0..3.0));
        let y = normals(&mut rng, n, 2.0);
        let alpha = rng.random_range(0.1..2.0);
        check_separable("pretrain", &out, &y, |o, y| {
            pretrain_loss(o.view(), y.view(), alpha)
        });

        let tl = rng.random_range(0.05..0.5);
        let tu = rng.random_range(tl + 0.01..0.99);
        // Skip pinball kinks: residuals within the difference step of zero.
        let kinked = (0..n).any(|i| (0..2).any(|j| (y[i] - out[[i, j]]).abs() < 1e-3));
        if !kinked {
            check_separable("pinball", &out, &y, |o, y| {
                pinball_loss(o.view(), y.view(), tl, tu)
            });
        }
    }
}

fn eim_instance(rng: &mut ChaCha8Rng) -> (Array2<f64>, Array1<f64>, EimConfig) {
    let n = rng.random_range(100..160);
    let mut out = Array2::zeros((n, 2));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let mid: f64 = rng.random_range(-5.0..5.0);
        let hw: f64 = rng.random_range(0.1..2.0);
        // Some crossed bounds on purpose.
        let sign = if rng.random_bool(0.1) { -1.0 } else { 1.0 };
        out[[i, 0]] = mid - sign * hw;
        out[[i, 1]] = mid + sign * hw;
        y[i] = mid + hw * rng.sample::<f64, _>(StandardNormal);
    }
    let mut cfg = EimConfig::new(rng.random_range(0.6..0.95));
    cfg.delta = rng.random_range(1.0..3.0);
    (out, y, cfg)
}

fn check_eim(cfg: &EimConfig, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut skipped) = (0, 0);
    for _ in 0..INSTANCES {
        let (out, y, mut c) = eim_instance(&mut rng);
        c.selection = cfg.selection;
        c.detach_k = cfg.detach_k;
        let base = eim_loss(out.view(), y.view(), &c).unwrap();
        let f = |o: &Array2<f64>| eim_loss(o.view(), y.view(), &c).unwrap().loss;
        for i in 0..out.nrows() {
            let mid_kink = (out[[i, 0]] + out[[i, 1]] - 2.0 * y[i]).abs() < 1e-4;
            for j in 0..2 {
                let (fd, plus, minus) = central(&out, i, j, &f);
                let same = |o: &Array2<f64>| {
                    eim_loss(o.view(), y.view(), &c).unwrap().selected == base.selected
                };
                if mid_kink || !same(&plus) || !same(&minus) {
                    skipped += 1;
                    continue;
                }
                if c.detach_k {
                    // The stop-gradient variant treats k_B as a constant.
                    let w = (out[[i, 1]] - out[[i, 0]]).signum();
                    let expect = base.k_b * if j == 0 { -w } else { w };
                    assert!(close(base.gradient[[i, j]], expect));
                } else {
                    assert!(
                        close(base.gradient[[i, j]], fd),
                        "eim ({i},{j}): analytic {} vs numeric {fd}",
                        base.gradient[[i, j]]
                    );
                }
                checked += 1;
            }
        }
    }
    (checked, skipped)
}

#[test]
fn eim_window_gradient() {
    let (checked, skipped) = check_eim(&EimConfig::new(0.9), 3);
    assert!(
        skipped * 20 < checked,
        "{skipped} skipped of {}",
        checked + skipped
    );
}

#[test]
fn eim_nearest_rank_gradient() {
    let mut cfg = EimConfig::new(0.9);
    cfg.selection = KSelection::NearestRank;
    let (checked, skipped) = check_eim(&cfg, 4);
    assert!(skipped * 20 < checked);
}

#[test]
fn eim_detached_gradient() {
    let mut cfg = EimConfig::new(0.9);
    cfg.detach_k = true;
    check_eim(&cfg, 5);
}

#[test]
fn eim_dilation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..INSTANCES {
        let (out, y, cfg) = eim_instance(&mut rng);
        let c = rng.random_range(0.2..5.0);
        let mut scaled = out.clone();
        for i in 0..out.nrows() {
            let mid = 0.5 * (out[[i, 0]] + out[[i, 1]]);
            scaled[[i, 0]] = mid + c * (out[[i, 0]] - mid);
            scaled[[i, 1]] = mid + c * (out[[i, 1]] - mid);
        }
        let a = eim_loss(out.view(), y.view(), &cfg).unwrap();
        let b = eim_loss(scaled.view(), y.view(), &cfg).unwrap();
        assert_eq!(a.selected, b.selected);
        assert!(
            (a.loss - b.loss).abs() <= 1e-9 * a.loss.abs(),
            "{} vs {}",
            a.loss,
            b.loss
        );
    }
}

#[test]
fn k_factor_is_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let l: f64 = rng.random_range(-10.0..10.0);
        let u = l + rng.random_range(0.01..5.0);
        let y: f64 = rng.random_range(-20.0..20.0);
        let k = expansion_factor(l, u, y);
        let (mid, hw) = (0.5 * (l + u), 0.5 * (u - l));
        let tol = 1e-12 * (1.0 + mid.abs() + k * hw);
        assert!(mid - k * hw <= y + tol && y <= mid + k * hw + tol);
        if k > 1e-6 {
            let k2 = k - 1e-9 * k.max(1.0);
            assert!(!(mid - k2 * hw <= y && y <= mid + k2 * hw));
        }
    }
}

fn loss_of(net: &Network, x: &Array2<f64>, weights: &Array2<f64>) -> f64 {
    let out = net.forward(x.view()).unwrap();
    (&out * weights).sum() + 0.5 * out.mapv(|v| v * v).sum()
}

#[test]
#[allow(clippy::needless_range_loop)]
fn network_backprop_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for act in [Activation::Tanh, Activation::Relu, Activation::Identity] {
        for trial in 0..10 {
            let input = rng.random_range(1..5);
            let arity = rng.random_range(1..3);
            let hidden = [rng.random_range(2..6), rng.random_range(2..6)];
            let mut net = Network::mlp(input, &hidden, act, arity, &mut rng).unwrap();
            // Non-zero biases so relu units are not all at the kink.
            for p in 0..net.parameter_count() {
                *net.parameter_mut(p).unwrap() += 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
            let x = Array2::from_shape_fn((8, input), |_| rng.random_range(-2.0..2.0));
            let w = Array2::from_shape_fn((8, arity), |_| rng.random_range(-1.0..1.0));
            let mut tape = Tape::new();
            let out = net.forward_recorded(x.view(), &mut tape).unwrap();
            let grad_out = &w + &out;
            let analytic = net.backward(&tape, grad_out.view()).unwrap().to_flat();
            for p in 0..net.parameter_count() {
                let v = net.parameters_flat()[p];
                let h = 1e-6 * v.abs().max(1.0);
                *net.parameter_mut(p).unwrap() = v + h;
                let up = loss_of(&net, &x, &w);
                *net.parameter_mut(p).unwrap() = v - h;
                let down = loss_of(&net, &x, &w);
                *net.parameter_mut(p).unwrap() = v;
                let fd = (up - down) / (2.0 * h);
                assert!(
                    (analytic[p] - fd).abs() <= 1e-5 * analytic[p].abs().max(fd.abs()) + 1e-7,
                    "{act:?} trial {trial} param {p}: {} vs {fd}",
                    analytic[p]
                );
            }
        }
    }
}

#[test]
fn batch_gradient_is_sum_of_row_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let net = Network::mlp(3, &[4], Activation::Tanh, 2, &mut rng).unwrap();
    let x = Array2::from_shape_fn((6, 3), |_| rng.random_range(-1.0..1.0));
    let g = Array2::from_shape_fn((6, 2), |_| rng.random_range(-1.0..1.0));
    let mut tape = Tape::new();
    net.forward_recorded(x.view(), &mut tape).unwrap();
    let full = net.backward(&tape, g.view()).unwrap().to_flat();
    let mut summed = vec![0.0; full.len()];
    for i in 0..6 {
        let xi = x.slice(ndarray::s![i..i + 1, ..]);
        net.forward_recorded(xi, &mut tape).unwrap();
        let gi = net
            .backward(&tape, g.slice(ndarray::s![i..i + 1, ..]))
            .unwrap()
            .to_flat();
        for (s, v) in summed.iter_mut().zip(gi) {
            *s += v;
        }
    }
    for (a, b) in full.iter().zip(&summed) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}
