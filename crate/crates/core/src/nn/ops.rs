//! Batched forward and backward kernels. Activations are stored sample-major:
//! a batch of `b` samples is `b` consecutive per-sample buffers.

use rand::Rng;

use crate::error::{Error, Result};

use super::scalar::Scalar;

/// Valid, stride-1 convolution over `channels x height x width` inputs with
/// `filters x channels x kh x kw` kernels. A 1-D convolution is the case
/// `height = kh = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub filters: usize,
    pub kh: usize,
    pub kw: usize,
}

impl ConvGeom {
    pub fn new(channels: usize, height: usize, width: usize, filters: usize, kh: usize, kw: usize) -> Result<Self> {
        if [channels, height, width, filters, kh, kw].contains(&0) {
            return Err(Error::invalid("convolution extents must be positive"));
        }
        if kh > height || kw > width {
            return Err(Error::invalid(format!(
                "kernel {kh}x{kw} larger than input {height}x{width}"
            )));
        }
        Ok(ConvGeom {
            channels,
            height,
            width,
            filters,
            kh,
            kw,
        })
    }

    pub fn out_h(&self) -> usize {
        self.height - self.kh + 1
    }

    pub fn out_w(&self) -> usize {
        self.width - self.kw + 1
    }

    pub fn in_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn out_len(&self) -> usize {
        self.filters * self.out_h() * self.out_w()
    }

    /// Kernel elements per filter.
    pub fn patch_len(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    pub fn weight_len(&self) -> usize {
        self.filters * self.patch_len()
    }

    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        let (oh, ow) = (self.out_h(), self.out_w());
        let p = oh * ow;
        for c in 0..self.channels {
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = ((c * self.kh + i) * self.kw + j) * p;
                    for oy in 0..oh {
                        let src = (c * self.height + oy + i) * self.width + j;
                        cols[row + oy * ow..row + (oy + 1) * ow].copy_from_slice(&x[src..src + ow]);
                    }
                }
            }
        }
    }

    fn col2im<T: Scalar>(&self, cols: &[T], dx: &mut [T]) {
        let (oh, ow) = (self.out_h(), self.out_w());
        let p = oh * ow;
        for c in 0..self.channels {
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = ((c * self.kh + i) * self.kw + j) * p;
                    for oy in 0..oh {
                        let dst = (c * self.height + oy + i) * self.width + j;
                        for ox in 0..ow {
                            dx[dst + ox] = dx[dst + ox] + cols[row + oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

pub fn conv_forward<T: Scalar>(g: &ConvGeom, x: &[T], w: &[T], bias: &[T], batch: usize) -> Vec<T> {
    debug_assert_eq!(x.len(), batch * g.in_len());
    let p = g.out_h() * g.out_w();
    let mut cols = vec![T::zero(); g.patch_len() * p];
    let mut y = vec![T::zero(); batch * g.out_len()];
    for s in 0..batch {
        g.im2col(&x[s * g.in_len()..(s + 1) * g.in_len()], &mut cols);
        let ys = &mut y[s * g.out_len()..(s + 1) * g.out_len()];
        for (f, row) in ys.chunks_mut(p).enumerate() {
            row.iter_mut().for_each(|v| *v = bias[f]);
        }
        T::gemm(
            g.filters,
            g.patch_len(),
            p,
            T::one(),
            w,
            false,
            &cols,
            false,
            T::one(),
            ys,
        );
    }
    y
}

/// Accumulates kernel and bias gradients into `dw`, `db`; returns the input
/// gradient.
pub fn conv_backward<T: Scalar>(
    g: &ConvGeom,
    x: &[T],
    w: &[T],
    dy: &[T],
    batch: usize,
    dw: &mut [T],
    db: &mut [T],
) -> Vec<T> {
    let p = g.out_h() * g.out_w();
    let mut cols = vec![T::zero(); g.patch_len() * p];
    let mut dcols = vec![T::zero(); g.patch_len() * p];
    let mut dx = vec![T::zero(); batch * g.in_len()];
    for s in 0..batch {
        let xs = &x[s * g.in_len()..(s + 1) * g.in_len()];
        let dys = &dy[s * g.out_len()..(s + 1) * g.out_len()];
        g.im2col(xs, &mut cols);
        T::gemm(
            g.filters,
            p,
            g.patch_len(),
            T::one(),
            dys,
            false,
            &cols,
            true,
            T::one(),
            dw,
        );
        for (f, row) in dys.chunks(p).enumerate() {
            db[f] = db[f] + row.iter().copied().sum();
        }
        T::gemm(
            g.patch_len(),
            g.filters,
            p,
            T::one(),
            w,
            true,
            dys,
            false,
            T::zero(),
            &mut dcols,
        );
        g.col2im(&dcols, &mut dx[s * g.in_len()..(s + 1) * g.in_len()]);
    }
    dx
}

/// Non-overlapping max pooling with a `ph x pw` window. In floor mode a
/// trailing row or column that does not fill a window is dropped; otherwise
/// the extents must divide evenly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub ph: usize,
    pub pw: usize,
}

impl PoolGeom {
    pub fn new(channels: usize, height: usize, width: usize, ph: usize, pw: usize, floor: bool) -> Result<Self> {
        if [channels, height, width, ph, pw].contains(&0) || height < ph || width < pw {
            return Err(Error::invalid(format!(
                "cannot pool {height}x{width} with a {ph}x{pw} window"
            )));
        }
        if !floor && (!height.is_multiple_of(ph) || !width.is_multiple_of(pw)) {
            return Err(Error::invalid(format!(
                "extents {height}x{width} are not divisible by the {ph}x{pw} pool window"
            )));
        }
        Ok(PoolGeom {
            channels,
            height,
            width,
            ph,
            pw,
        })
    }

    pub fn out_h(&self) -> usize {
        self.height / self.ph
    }

    pub fn out_w(&self) -> usize {
        self.width / self.pw
    }

    pub fn in_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn out_len(&self) -> usize {
        self.channels * self.out_h() * self.out_w()
    }
}

/// Returns the pooled values and, per output, the index of the winning
/// input within its sample (first occurrence on ties).
pub fn pool_forward<T: Scalar>(g: &PoolGeom, x: &[T], batch: usize) -> (Vec<T>, Vec<u32>) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let mut y = Vec::with_capacity(batch * g.out_len());
    let mut arg = Vec::with_capacity(batch * g.out_len());
    for s in 0..batch {
        let xs = &x[s * g.in_len()..(s + 1) * g.in_len()];
        for c in 0..g.channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = (T::neg_infinity(), 0usize);
                    for i in 0..g.ph {
                        for j in 0..g.pw {
                            let idx = (c * g.height + oy * g.ph + i) * g.width + ox * g.pw + j;
                            if xs[idx] > best.0 || i + j == 0 {
                                best = (xs[idx], idx);
                            }
                        }
                    }
                    y.push(best.0);
                    arg.push(best.1 as u32);
                }
            }
        }
    }
    (y, arg)
}

pub fn pool_backward<T: Scalar>(g: &PoolGeom, dy: &[T], argmax: &[u32], batch: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); batch * g.in_len()];
    for s in 0..batch {
        let out = s * g.out_len()..(s + 1) * g.out_len();
        let dxs = &mut dx[s * g.in_len()..(s + 1) * g.in_len()];
        for (&d, &a) in dy[out.clone()].iter().zip(&argmax[out]) {
            dxs[a as usize] = dxs[a as usize] + d;
        }
    }
    dx
}

/// `y = W x + b` per sample, `W` stored `n_out x n_in`.
pub fn dense_forward<T: Scalar>(n_in: usize, n_out: usize, x: &[T], w: &[T], bias: &[T], batch: usize) -> Vec<T> {
    let mut y: Vec<T> = (0..batch).flat_map(|_| bias.iter().copied()).collect();
    T::gemm(batch, n_in, n_out, T::one(), x, false, w, true, T::one(), &mut y);
    y
}

#[allow(clippy::too_many_arguments)]
pub fn dense_backward<T: Scalar>(
    n_in: usize,
    n_out: usize,
    x: &[T],
    w: &[T],
    dy: &[T],
    batch: usize,
    dw: &mut [T],
    db: &mut [T],
) -> Vec<T> {
    T::gemm(n_out, batch, n_in, T::one(), dy, true, x, false, T::one(), dw);
    for row in dy.chunks(n_out) {
        for (b, &d) in db.iter_mut().zip(row) {
            *b = *b + d;
        }
    }
    let mut dx = vec![T::zero(); batch * n_in];
    T::gemm(batch, n_out, n_in, T::one(), dy, false, w, false, T::zero(), &mut dx);
    dx
}

pub fn relu_forward<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| v.max(T::zero())).collect()
}

pub fn relu_backward<T: Scalar>(x: &[T], dy: &[T]) -> Vec<T> {
    x.iter()
        .zip(dy)
        .map(|(&v, &d)| if v > T::zero() { d } else { T::zero() })
        .collect()
}

/// Inverted-dropout multipliers: 0 with probability `p`, else `1/(1-p)`.
pub fn dropout_mask<T: Scalar>(len: usize, p: f64, rng: &mut impl Rng) -> Vec<T> {
    if p == 0.0 {
        return vec![T::one(); len];
    }
    let keep = T::of(1.0 / (1.0 - p));
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep })
        .collect()
}

/// Elementwise product; dropout's forward and backward are both this.
pub fn apply_mask<T: Scalar>(x: &[T], mask: &[T]) -> Vec<T> {
    x.iter().zip(mask).map(|(&a, &m)| a * m).collect()
}

/// Softmax with max subtraction.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Gradient of softmax outputs w.r.t. logits, given the output gradient.
pub fn softmax_backward<T: Scalar>(probs: &[T], dp: &[T]) -> Vec<T> {
    let dot: T = probs.iter().zip(dp).map(|(&p, &d)| p * d).sum();
    probs.iter().zip(dp).map(|(&p, &d)| p * (d - dot)).collect()
}
