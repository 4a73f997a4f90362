//! Central finite-difference checks of every layer kernel and the weighted
//! loss, in double precision on randomized shapes.

use rand::seq::SliceRandom;
use rand::Rng;

use super::loss::{argmax, softmax_ce_backward, weighted_cross_entropy, CostMatrix};
use super::ops::{self, ConvGeom, PoolGeom};

pub const STEP: f64 = 1e-4;

/// Relative error with a small absolute floor so near-zero gradients do
/// not divide by zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error between `analytic` and central differences of `f`
/// around `x`.
pub fn check(f: impl Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + STEP;
        let up = f(&probe);
        probe[i] = x[i] - STEP;
        let down = f(&probe);
        probe[i] = x[i];
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * STEP)));
    }
    worst
}

fn normal_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Values whose pairwise gaps are far larger than the difference step.
fn distinct_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 * 0.05 - n as f64 * 0.025).collect();
    v.shuffle(rng);
    v
}

fn conv_case(rng: &mut impl Rng, g: ConvGeom, batch: usize) -> f64 {
    let x = normal_vec(rng, batch * g.in_len());
    let w = normal_vec(rng, g.weight_len());
    let b = normal_vec(rng, g.filters);
    let r = normal_vec(rng, batch * g.out_len());
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; b.len()];
    let dx = ops::conv_backward(&g, &x, &w, &r, batch, &mut dw, &mut db);
    let ex = check(|v| dot(&ops::conv_forward(&g, v, &w, &b, batch), &r), &x, &dx);
    let ew = check(|v| dot(&ops::conv_forward(&g, &x, v, &b, batch), &r), &w, &dw);
    let eb = check(|v| dot(&ops::conv_forward(&g, &x, &w, v, batch), &r), &b, &db);
    ex.max(ew).max(eb)
}

/// 2-D convolution with random channels, non-square extents and kernels.
pub fn conv2d(rng: &mut impl Rng) -> f64 {
    let k = rng.gen_range(1..=3);
    let g = ConvGeom::new(
        rng.gen_range(1..=3),
        rng.gen_range(k..=8),
        rng.gen_range(k..=8),
        rng.gen_range(1..=4),
        k,
        k,
    )
    .expect("valid geometry");
    let batch = rng.gen_range(1..=2);
    conv_case(rng, g, batch)
}

pub fn conv1d(rng: &mut impl Rng) -> f64 {
    let k = rng.gen_range(1..=5);
    let g = ConvGeom::new(
        rng.gen_range(1..=3),
        1,
        rng.gen_range(k..=16),
        rng.gen_range(1..=4),
        1,
        k,
    )
    .expect("valid geometry");
    let batch = rng.gen_range(1..=2);
    conv_case(rng, g, batch)
}

fn pool_case(rng: &mut impl Rng, g: PoolGeom, batch: usize) -> f64 {
    let x = distinct_vec(rng, batch * g.in_len());
    let r = normal_vec(rng, batch * g.out_len());
    let (_, arg) = ops::pool_forward(&g, &x, batch);
    let dx = ops::pool_backward(&g, &r, &arg, batch);
    check(|v| dot(&ops::pool_forward(&g, v, batch).0, &r), &x, &dx)
}

pub fn maxpool2d(rng: &mut impl Rng) -> f64 {
    let g = PoolGeom::new(
        rng.gen_range(1..=3),
        2 * rng.gen_range(1..=4),
        2 * rng.gen_range(1..=4),
        2,
        2,
        false,
    )
    .expect("even extents");
    let batch = rng.gen_range(1..=2);
    pool_case(rng, g, batch)
}

/// Includes odd lengths in floor mode.
pub fn maxpool1d(rng: &mut impl Rng) -> f64 {
    let g = PoolGeom::new(rng.gen_range(1..=3), 1, rng.gen_range(2..=15), 1, 2, true).expect("length at least 2");
    let batch = rng.gen_range(1..=2);
    pool_case(rng, g, batch)
}

pub fn dense(rng: &mut impl Rng) -> f64 {
    let (n_in, n_out, batch) = (rng.gen_range(1..=12), rng.gen_range(1..=12), rng.gen_range(1..=3));
    let x = normal_vec(rng, batch * n_in);
    let w = normal_vec(rng, n_in * n_out);
    let b = normal_vec(rng, n_out);
    let r = normal_vec(rng, batch * n_out);
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; b.len()];
    let dx = ops::dense_backward(n_in, n_out, &x, &w, &r, batch, &mut dw, &mut db);
    let f = |x: &[f64], w: &[f64], b: &[f64]| dot(&ops::dense_forward(n_in, n_out, x, w, b, batch), &r);
    let ex = check(|v| f(v, &w, &b), &x, &dx);
    let ew = check(|v| f(&x, v, &b), &w, &dw);
    let eb = check(|v| f(&x, &w, v), &b, &db);
    ex.max(ew).max(eb)
}

/// Inputs are kept away from the kink at zero.
pub fn relu(rng: &mut impl Rng) -> f64 {
    let n = rng.gen_range(1..=40);
    let x: Vec<f64> = (0..n)
        .map(|_| {
            let m = rng.gen_range(0.01..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    let r = normal_vec(rng, n);
    let dx = ops::relu_backward(&x, &r);
    check(|v| dot(&ops::relu_forward(v), &r), &x, &dx)
}

/// Training-mode dropout with a fixed mask.
pub fn dropout(rng: &mut impl Rng) -> f64 {
    let n = rng.gen_range(1..=40);
    let p = rng.gen_range(0.0..0.8);
    let mask: Vec<f64> = ops::dropout_mask(n, p, rng);
    let x = normal_vec(rng, n);
    let r = normal_vec(rng, n);
    let dx = ops::apply_mask(&r, &mask);
    check(|v| dot(&ops::apply_mask(v, &mask), &r), &x, &dx)
}

pub fn softmax(rng: &mut impl Rng) -> f64 {
    let n = rng.gen_range(2..=12);
    let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let r = normal_vec(rng, n);
    let dz = ops::softmax_backward(&ops::softmax(&z), &r);
    check(|v| dot(&ops::softmax(v), &r), &z, &dz)
}

/// Softmax followed by the cost-weighted cross-entropy over nine classes.
/// Logits keep a clear winner so the weight is constant near the probe.
pub fn weighted_loss(rng: &mut impl Rng) -> f64 {
    let costs = CostMatrix::default();
    let label = rng.gen_range(0..9);
    let mut z: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let top = argmax(&z);
    z[top] += 0.5;
    let probs = ops::softmax(&z);
    let (_, w) = weighted_cross_entropy(&probs, label, &costs);
    let dz = softmax_ce_backward(&probs, label, w);
    check(|v| weighted_cross_entropy(&ops::softmax(v), label, &costs).0, &z, &dz)
}

/// Direct nested-loop cross-correlation, the reference for the
/// im2col/GEMM kernel.
pub fn naive_conv2d(g: &ConvGeom, x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; g.out_len()];
    for f in 0..g.filters {
        for oy in 0..g.out_h() {
            for ox in 0..g.out_w() {
                let mut s = b[f];
                for c in 0..g.channels {
                    for i in 0..g.kh {
                        for j in 0..g.kw {
                            s += w[((f * g.channels + c) * g.kh + i) * g.kw + j]
                                * x[(c * g.height + oy + i) * g.width + ox + j];
                        }
                    }
                }
                y[(f * g.out_h() + oy) * g.out_w() + ox] = s;
            }
        }
    }
    y
}

/// Largest elementwise gap between the fast and the naive convolution on a
/// random geometry.
pub fn conv2d_oracle_gap(rng: &mut impl Rng) -> f64 {
    let k = rng.gen_range(1..=5);
    let g = ConvGeom::new(
        rng.gen_range(1..=4),
        rng.gen_range(k..=20),
        rng.gen_range(k..=20),
        rng.gen_range(1..=8),
        k,
        k,
    )
    .expect("valid geometry");
    let x = normal_vec(rng, g.in_len());
    let w = normal_vec(rng, g.weight_len());
    let b = normal_vec(rng, g.filters);
    let fast = ops::conv_forward(&g, &x, &w, &b, 1);
    let slow = naive_conv2d(&g, &x, &w, &b);
    fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Name and checker of every differentiable operation.
pub type Checker = fn(&mut rand_chacha::ChaCha8Rng) -> f64;

pub fn all_checks() -> Vec<(&'static str, Checker)> {
    vec![
        ("conv2d", conv2d),
        ("conv1d", conv1d),
        ("maxpool2d", maxpool2d),
        ("maxpool1d", maxpool1d),
        ("dense", dense),
        ("relu", relu),
        ("dropout", dropout),
        ("softmax", softmax),
        ("weighted_loss", weighted_loss),
    ]
}
