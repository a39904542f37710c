//! Network layers. Every layer has two paths: `infer(&self)` is pure and
//! safe to share across threads; `forward(&mut self)` is the training pass,
//! caching whatever `backward` needs. Parameter gradients accumulate into
//! `Param::grad` until `zero_grad`.

#![allow(clippy::needless_range_loop)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::seed::NormalSource;
use crate::tensor::Tensor;

/// A trainable tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Param {
        let grad = Tensor::zeros(value.shape());
        Param { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

// ---------------------------------------------------------------------------
// Convolution (stride 1, "same" padding for odd kernels)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Param, // (out_ch, in_ch, k, k)
    pub bias: Param,   // (out_ch)
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    cached_input: Option<Tensor>,
}

impl Conv2d {
    /// He fan-in initialization for the kernel, zero bias.
    pub fn new(in_ch: usize, out_ch: usize, k: usize, init: &mut NormalSource) -> Conv2d {
        assert!(k % 2 == 1, "conv kernel must be odd for same padding");
        let std = (2.0 / (in_ch * k * k) as f64).sqrt();
        let mut w = Tensor::zeros([out_ch, in_ch, k, k]);
        for v in w.data_mut() {
            *v = init.sample() * std;
        }
        Conv2d {
            weight: Param::new(w),
            bias: Param::new(Tensor::zeros([out_ch, 1, 1, 1])),
            in_ch,
            out_ch,
            k,
            cached_input: None,
        }
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        let [n, c, h, w] = x.shape();
        debug_assert_eq!(c, self.in_ch);
        let pad = (self.k / 2) as isize;
        let mut out = Tensor::zeros([n, self.out_ch, h, w]);
        for ni in 0..n {
            for oc in 0..self.out_ch {
                let b = self.bias.value.data()[oc];
                out.plane_mut(ni, oc).iter_mut().for_each(|v| *v = b);
                for ic in 0..self.in_ch {
                    for ky in 0..self.k {
                        for kx in 0..self.k {
                            let wgt = self.weight.value.at(oc, ic, ky, kx);
                            let dy = ky as isize - pad;
                            let dx = kx as isize - pad;
                            shifted_axpy(out.plane_mut(ni, oc), x.plane(ni, ic), h, w, dy, dx, wgt);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let out = self.infer(x);
        self.cached_input = Some(x.clone());
        out
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let x = self.cached_input.as_ref().expect("conv backward without forward");
        let [n, _, h, w] = x.shape();
        let pad = (self.k / 2) as isize;
        let mut grad_in = Tensor::zeros(x.shape());
        for ni in 0..n {
            for oc in 0..self.out_ch {
                let go = grad_out.plane(ni, oc);
                self.bias.grad.data_mut()[oc] += go.iter().sum::<f64>();
                for ic in 0..self.in_ch {
                    for ky in 0..self.k {
                        for kx in 0..self.k {
                            let dy = ky as isize - pad;
                            let dx = kx as isize - pad;
                            // dW = Σ grad_out(y,x) · in(y+dy, x+dx)
                            let dot = shifted_dot(go, x.plane(ni, ic), h, w, dy, dx);
                            let wi = self.weight.value.idx(oc, ic, ky, kx);
                            self.weight.grad.data_mut()[wi] += dot;
                            // dIn(y+dy, x+dx) += w · grad_out(y,x)
                            let wgt = self.weight.value.data()[wi];
                            shifted_axpy(grad_in.plane_mut(ni, ic), go, h, w, -dy, -dx, wgt);
                        }
                    }
                }
            }
        }
        grad_in
    }
}

/// out(y, x) += k · src(y + dy, x + dx) over the valid overlap.
fn shifted_axpy(out: &mut [f64], src: &[f64], h: usize, w: usize, dy: isize, dx: isize, k: f64) {
    if k == 0.0 {
        return;
    }
    let y0 = (-dy).max(0) as usize;
    let y1 = ((h as isize).min(h as isize - dy)).max(0) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = ((w as isize).min(w as isize - dx)).max(0) as usize;
    if x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let dst = &mut out[y * w + x0..y * w + x1];
        let src_off = sy * w + (x0 as isize + dx) as usize;
        let s = &src[src_off..src_off + (x1 - x0)];
        for (d, &v) in dst.iter_mut().zip(s.iter()) {
            *d += k * v;
        }
    }
}

/// Σ a(y, x) · b(y + dy, x + dx) over the valid overlap.
fn shifted_dot(a: &[f64], b: &[f64], h: usize, w: usize, dy: isize, dx: isize) -> f64 {
    let y0 = (-dy).max(0) as usize;
    let y1 = ((h as isize).min(h as isize - dy)).max(0) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = ((w as isize).min(w as isize - dx)).max(0) as usize;
    if x0 >= x1 {
        return 0.0;
    }
    let mut acc = 0.0;
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let aa = &a[y * w + x0..y * w + x1];
        let off = sy * w + (x0 as isize + dx) as usize;
        let bb = &b[off..off + (x1 - x0)];
        for (&u, &v) in aa.iter().zip(bb.iter()) {
            acc += u * v;
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Transposed convolution (kernel 2, stride 2): doubles spatial dims
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub weight: Param, // (in_ch, out_ch, 2, 2)
    pub bias: Param,   // (out_ch)
    pub in_ch: usize,
    pub out_ch: usize,
    cached_input: Option<Tensor>,
}

impl ConvTranspose2d {
    pub fn new(in_ch: usize, out_ch: usize, init: &mut NormalSource) -> ConvTranspose2d {
        let std = (2.0 / in_ch as f64).sqrt();
        let mut w = Tensor::zeros([in_ch, out_ch, 2, 2]);
        for v in w.data_mut() {
            *v = init.sample() * std;
        }
        ConvTranspose2d {
            weight: Param::new(w),
            bias: Param::new(Tensor::zeros([out_ch, 1, 1, 1])),
            in_ch,
            out_ch,
            cached_input: None,
        }
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        let [n, c, h, w] = x.shape();
        debug_assert_eq!(c, self.in_ch);
        let (oh, ow) = (h * 2, w * 2);
        let mut out = Tensor::zeros([n, self.out_ch, oh, ow]);
        for ni in 0..n {
            for oc in 0..self.out_ch {
                let b = self.bias.value.data()[oc];
                out.plane_mut(ni, oc).iter_mut().for_each(|v| *v = b);
                for ic in 0..self.in_ch {
                    let xin = x.plane(ni, ic);
                    for ky in 0..2 {
                        for kx in 0..2 {
                            let wgt = self.weight.value.at(ic, oc, ky, kx);
                            if wgt == 0.0 {
                                continue;
                            }
                            let op = out.plane_mut(ni, oc);
                            for y in 0..h {
                                let orow = (2 * y + ky) * ow;
                                let irow = y * w;
                                for xx in 0..w {
                                    op[orow + 2 * xx + kx] += wgt * xin[irow + xx];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let out = self.infer(x);
        self.cached_input = Some(x.clone());
        out
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let x = self.cached_input.as_ref().expect("convT backward without forward");
        let [n, _, h, w] = x.shape();
        let ow = w * 2;
        let mut grad_in = Tensor::zeros(x.shape());
        for ni in 0..n {
            for oc in 0..self.out_ch {
                let go = grad_out.plane(ni, oc);
                self.bias.grad.data_mut()[oc] += go.iter().sum::<f64>();
                for ic in 0..self.in_ch {
                    let xin = x.plane(ni, ic);
                    for ky in 0..2 {
                        for kx in 0..2 {
                            let wi = self.weight.value.idx(ic, oc, ky, kx);
                            let wgt = self.weight.value.data()[wi];
                            let mut dw = 0.0;
                            let gi = grad_in.plane_mut(ni, ic);
                            for y in 0..h {
                                let orow = (2 * y + ky) * ow;
                                let irow = y * w;
                                for xx in 0..w {
                                    let g = go[orow + 2 * xx + kx];
                                    dw += g * xin[irow + xx];
                                    gi[irow + xx] += wgt * g;
                                }
                            }
                            self.weight.grad.data_mut()[wi] += dw;
                        }
                    }
                }
            }
        }
        grad_in
    }
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

/// Momentum of the running statistics: running ← m·running + (1−m)·batch.
pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub gamma: Param, // (c)
    pub beta: Param,  // (c)
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub channels: usize,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    x_hat: Tensor,
    inv_std: Vec<f64>,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> BatchNorm2d {
        BatchNorm2d {
            gamma: Param::new(Tensor::filled([channels, 1, 1, 1], 1.0)),
            beta: Param::new(Tensor::zeros([channels, 1, 1, 1])),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            channels,
            cache: None,
        }
    }

    /// Inference path: normalize with the running averages.
    pub fn infer(&self, x: &Tensor) -> Tensor {
        let [n, c, _, _] = x.shape();
        debug_assert_eq!(c, self.channels);
        let mut out = Tensor::zeros(x.shape());
        for ci in 0..c {
            let mean = self.running_mean[ci];
            let istd = 1.0 / (self.running_var[ci] + BN_EPS).sqrt();
            let g = self.gamma.value.data()[ci];
            let b = self.beta.value.data()[ci];
            for ni in 0..n {
                let xp = x.plane(ni, ci);
                for (o, &v) in out.plane_mut(ni, ci).iter_mut().zip(xp.iter()) {
                    *o = g * (v - mean) * istd + b;
                }
            }
        }
        out
    }

    /// Training path: batch statistics (biased variance) plus running-average
    /// update.
    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let [n, c, h, w] = x.shape();
        debug_assert_eq!(c, self.channels);
        let m = (n * h * w) as f64;
        let mut out = Tensor::zeros(x.shape());
        let mut x_hat = Tensor::zeros(x.shape());
        let mut inv_std = vec![0.0; c];
        for ci in 0..c {
            let mut sum = 0.0;
            for ni in 0..n {
                sum += x.plane(ni, ci).iter().sum::<f64>();
            }
            let mean = sum / m;
            let mut var = 0.0;
            for ni in 0..n {
                for &v in x.plane(ni, ci) {
                    let d = v - mean;
                    var += d * d;
                }
            }
            var /= m;
            let istd = 1.0 / (var + BN_EPS).sqrt();
            inv_std[ci] = istd;
            let g = self.gamma.value.data()[ci];
            let b = self.beta.value.data()[ci];
            for ni in 0..n {
                let xp = x.plane(ni, ci);
                let xh = x_hat.plane_mut(ni, ci);
                for (h_out, &v) in xh.iter_mut().zip(xp.iter()) {
                    *h_out = (v - mean) * istd;
                }
                for (o, &hv) in out.plane_mut(ni, ci).iter_mut().zip(x_hat.plane(ni, ci).iter()) {
                    *o = g * hv + b;
                }
            }
            self.running_mean[ci] = BN_MOMENTUM * self.running_mean[ci] + (1.0 - BN_MOMENTUM) * mean;
            self.running_var[ci] = BN_MOMENTUM * self.running_var[ci] + (1.0 - BN_MOMENTUM) * var;
        }
        self.cache = Some(BnCache { x_hat, inv_std });
        out
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let cache = self.cache.as_ref().expect("bn backward without training forward");
        let [n, c, h, w] = grad_out.shape();
        let m = (n * h * w) as f64;
        let mut grad_in = Tensor::zeros(grad_out.shape());
        for ci in 0..c {
            let g = self.gamma.value.data()[ci];
            let istd = cache.inv_std[ci];
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for ni in 0..n {
                let dy = grad_out.plane(ni, ci);
                let xh = cache.x_hat.plane(ni, ci);
                for (&d, &xv) in dy.iter().zip(xh.iter()) {
                    sum_dy += d;
                    sum_dy_xhat += d * xv;
                }
            }
            self.beta.grad.data_mut()[ci] += sum_dy;
            self.gamma.grad.data_mut()[ci] += sum_dy_xhat;
            let mean_dy = sum_dy / m;
            let mean_dy_xhat = sum_dy_xhat / m;
            for ni in 0..n {
                let dy = grad_out.plane(ni, ci);
                let xh = cache.x_hat.plane(ni, ci);
                let gi = grad_in.plane_mut(ni, ci);
                for ((o, &d), &xv) in gi.iter_mut().zip(dy.iter()).zip(xh.iter()) {
                    *o = g * istd * (d - mean_dy - xv * mean_dy_xhat);
                }
            }
        }
        grad_in
    }
}

// ---------------------------------------------------------------------------
// Max pooling (2×2, stride 2)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct MaxPool2d {
    argmax: Option<(Vec<u32>, [usize; 4])>,
}

impl MaxPool2d {
    pub fn new() -> MaxPool2d {
        MaxPool2d { argmax: None }
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        self.pool(x).0
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let (out, arg) = self.pool(x);
        self.argmax = Some((arg, x.shape()));
        out
    }

    fn pool(&self, x: &Tensor) -> (Tensor, Vec<u32>) {
        let [n, c, h, w] = x.shape();
        debug_assert!(h % 2 == 0 && w % 2 == 0, "pooling requires even dims");
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros([n, c, oh, ow]);
        let mut arg = vec![0u32; n * c * oh * ow];
        let mut ai = 0;
        for ni in 0..n {
            for ci in 0..c {
                let xp = x.plane(ni, ci);
                let op = out.plane_mut(ni, ci);
                for y in 0..oh {
                    for xx in 0..ow {
                        // First maximum in scan order wins ties.
                        let mut best = f64::NEG_INFINITY;
                        let mut best_i = 0usize;
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let i = (2 * y + dy) * w + 2 * xx + dx;
                                if xp[i] > best {
                                    best = xp[i];
                                    best_i = i;
                                }
                            }
                        }
                        op[y * ow + xx] = best;
                        arg[ai] = best_i as u32;
                        ai += 1;
                    }
                }
            }
        }
        (out, arg)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let (arg, in_shape) = self.argmax.as_ref().expect("pool backward without forward");
        let [n, c, _, _] = *in_shape;
        let [_, _, oh, ow] = grad_out.shape();
        let mut grad_in = Tensor::zeros(*in_shape);
        let mut ai = 0;
        for ni in 0..n {
            for ci in 0..c {
                let go = grad_out.plane(ni, ci);
                let gi = grad_in.plane_mut(ni, ci);
                for &g in go.iter().take(oh * ow) {
                    gi[arg[ai] as usize] += g;
                    ai += 1;
                }
            }
        }
        grad_in
    }
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Relu {
        Relu { mask: None }
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        let mut out = x.clone();
        for o in out.data_mut() {
            if *o < 0.0 {
                *o = 0.0;
            }
        }
        out
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let out = self.infer(x);
        self.mask = Some(x.data().iter().map(|&v| v > 0.0).collect());
        out
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let mask = self.mask.as_ref().expect("relu backward without forward");
        let mut grad_in = grad_out.clone();
        for (g, &keep) in grad_in.data_mut().iter_mut().zip(mask.iter()) {
            if !keep {
                *g = 0.0;
            }
        }
        grad_in
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sigmoid {
    out: Option<Tensor>,
}

impl Sigmoid {
    pub fn new() -> Sigmoid {
        Sigmoid { out: None }
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        let mut out = x.clone();
        for v in out.data_mut() {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        out
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let out = self.infer(x);
        self.out = Some(out.clone());
        out
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let out = self.out.as_ref().expect("sigmoid backward without forward");
        let mut grad_in = grad_out.clone();
        for (g, &s) in grad_in.data_mut().iter_mut().zip(out.data().iter()) {
            *g *= s * (1.0 - s);
        }
        grad_in
    }
}

// ---------------------------------------------------------------------------
// Dropout (inverted scaling)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Dropout {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
        Dropout { rate, mask: None }
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        x.clone()
    }

    pub fn forward(&mut self, x: &Tensor, rng: &mut ChaCha8Rng) -> Tensor {
        if self.rate == 0.0 {
            self.mask = Some(vec![1.0; x.len()]);
            return x.clone();
        }
        let keep = 1.0 - self.rate;
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if rng.gen::<f64>() < self.rate { 0.0 } else { 1.0 / keep })
            .collect();
        let mut out = x.clone();
        for (o, &m) in out.data_mut().iter_mut().zip(mask.iter()) {
            *o *= m;
        }
        self.mask = Some(mask);
        out
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let mask = self.mask.as_ref().expect("dropout backward without forward");
        let mut grad_in = grad_out.clone();
        for (g, &m) in grad_in.data_mut().iter_mut().zip(mask.iter()) {
            *g *= m;
        }
        grad_in
    }

    #[cfg(test)]
    pub(crate) fn cached_mask(&self) -> Option<&Vec<f64>> {
        self.mask.as_ref()
    }
}
