//! Layers with explicit forward/backward passes. Activations are `NCHW`
//! row-major. Per-sample work runs on rayon and is reduced in sample order,
//! so results do not depend on the thread count.

use rand::Rng;
use rayon::prelude::*;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Scalar> Param<T> {
    fn new(name: impl Into<String>, shape: Vec<usize>, value: Vec<T>) -> Self {
        let n = value.len();
        debug_assert_eq!(n, shape.iter().product::<usize>());
        Param { name: name.into(), shape, value, grad: vec![T::zero(); n] }
    }

    fn filled(name: impl Into<String>, shape: Vec<usize>, v: T) -> Self {
        let n = shape.iter().product();
        Self::new(name, shape, vec![v; n])
    }

    fn uniform(name: impl Into<String>, shape: Vec<usize>, bound: f64, rng: &mut impl Rng) -> Self {
        let n = shape.iter().product();
        let value = (0..n).map(|_| T::lit(rng.random_range(-bound..=bound))).collect();
        Self::new(name, shape, value)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }
}

/// Non-trainable state saved with a model (batch-norm running statistics).
#[derive(Debug, Clone, PartialEq)]
pub struct Buffer<T> {
    pub name: String,
    pub value: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Act<T> {
    pub data: Vec<T>,
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl<T: Scalar> Act<T> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Act { data: vec![T::zero(); n * c * h * w], n, c, h, w }
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    pub fn sample_len(&self) -> usize {
        self.c * self.h * self.w
    }

    fn like(&self, data: Vec<T>) -> Self {
        Act { data, n: self.n, c: self.c, h: self.h, w: self.w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub trait Visit<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>));
    fn visit_buffers(&mut self, _f: &mut dyn FnMut(&mut Buffer<T>)) {}
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Param<T>,
    input: Option<Act<T>>,
}

impl<T: Scalar> Conv2d<T> {
    /// Kaiming-uniform initialisation (`bound = sqrt(6 / fan_in)`).
    pub fn new(name: &str, in_c: usize, out_c: usize, k: usize, stride: usize, rng: &mut impl Rng) -> Self {
        let fan_in = (in_c * k * k) as f64;
        let weight = Param::uniform(format!("{name}.weight"), vec![out_c, in_c, k, k], (6.0 / fan_in).sqrt(), rng);
        Conv2d { in_c, out_c, k, stride, pad: k / 2, weight, input: None }
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        ((h + 2 * self.pad - self.k) / self.stride + 1, (w + 2 * self.pad - self.k) / self.stride + 1)
    }

    fn im2col(&self, x: &[T], h: usize, w: usize, oh: usize, ow: usize) -> Vec<T> {
        let (k, s, p) = (self.k, self.stride, self.pad as isize);
        let np = oh * ow;
        let mut cols = vec![T::zero(); self.in_c * k * k * np];
        for ci in 0..self.in_c {
            let plane = &x[ci * h * w..(ci + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut cols[((ci * k + ky) * k + kx) * np..][..np];
                    for oy in 0..oh {
                        let iy = (oy * s + ky) as isize - p;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        let dst = &mut row[oy * ow..(oy + 1) * ow];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * s + kx) as isize - p;
                            if ix >= 0 && ix < w as isize {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[T], h: usize, w: usize, oh: usize, ow: usize) -> Vec<T> {
        let (k, s, p) = (self.k, self.stride, self.pad as isize);
        let np = oh * ow;
        let mut x = vec![T::zero(); self.in_c * h * w];
        for ci in 0..self.in_c {
            for ky in 0..k {
                for kx in 0..k {
                    let row = &cols[((ci * k + ky) * k + kx) * np..][..np];
                    for oy in 0..oh {
                        let iy = (oy * s + ky) as isize - p;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let base = ci * h * w + iy as usize * w;
                        for ox in 0..ow {
                            let ix = (ox * s + kx) as isize - p;
                            if ix >= 0 && ix < w as isize {
                                x[base + ix as usize] += row[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
        x
    }

    pub fn forward(&mut self, x: &Act<T>, mode: Mode) -> Act<T> {
        assert_eq!(x.c, self.in_c, "conv input channels");
        let (oh, ow) = self.out_dims(x.h, x.w);
        let np = oh * ow;
        let r = self.in_c * self.k * self.k;
        let wt = &self.weight.value;
        let per: Vec<Vec<T>> = (0..x.n)
            .into_par_iter()
            .map(|b| {
                let cols = self.im2col(&x.data[b * x.sample_len()..(b + 1) * x.sample_len()], x.h, x.w, oh, ow);
                let mut out = vec![T::zero(); self.out_c * np];
                for o in 0..self.out_c {
                    let dst = &mut out[o * np..(o + 1) * np];
                    for ri in 0..r {
                        let wv = wt[o * r + ri];
                        if wv == T::zero() {
                            continue;
                        }
                        for (d, &c) in dst.iter_mut().zip(&cols[ri * np..(ri + 1) * np]) {
                            *d += wv * c;
                        }
                    }
                }
                out
            })
            .collect();
        if mode == Mode::Train {
            self.input = Some(x.clone());
        }
        Act { data: per.concat(), n: x.n, c: self.out_c, h: oh, w: ow }
    }

    /// Accumulates the weight gradient; returns the input gradient when asked.
    pub fn backward(&mut self, dy: &Act<T>, need_dx: bool) -> Option<Act<T>> {
        let x = self.input.take().expect("conv backward before forward");
        let (oh, ow) = (dy.h, dy.w);
        let np = oh * ow;
        let r = self.in_c * self.k * self.k;
        let wt = &self.weight.value;
        let per: Vec<(Vec<T>, Option<Vec<T>>)> = (0..x.n)
            .into_par_iter()
            .map(|b| {
                let cols = self.im2col(&x.data[b * x.sample_len()..(b + 1) * x.sample_len()], x.h, x.w, oh, ow);
                let g = &dy.data[b * self.out_c * np..(b + 1) * self.out_c * np];
                let mut dw = vec![T::zero(); self.out_c * r];
                for o in 0..self.out_c {
                    let go = &g[o * np..(o + 1) * np];
                    for ri in 0..r {
                        dw[o * r + ri] = go.iter().zip(&cols[ri * np..(ri + 1) * np]).map(|(&a, &c)| a * c).sum();
                    }
                }
                let dx = need_dx.then(|| {
                    let mut dcols = vec![T::zero(); r * np];
                    for o in 0..self.out_c {
                        let go = &g[o * np..(o + 1) * np];
                        for ri in 0..r {
                            let wv = wt[o * r + ri];
                            for (d, &gv) in dcols[ri * np..(ri + 1) * np].iter_mut().zip(go) {
                                *d += wv * gv;
                            }
                        }
                    }
                    self.col2im(&dcols, x.h, x.w, oh, ow)
                });
                (dw, dx)
            })
            .collect();
        let mut dx_all = Vec::with_capacity(if need_dx { x.data.len() } else { 0 });
        for (dw, dx) in per {
            for (g, d) in self.weight.grad.iter_mut().zip(dw) {
                *g += d;
            }
            if let Some(dx) = dx {
                dx_all.extend(dx);
            }
        }
        need_dx.then(|| x.like(dx_all))
    }
}

impl<T: Scalar> Visit<T> for Conv2d<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.weight);
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BatchNorm2d<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Buffer<T>,
    pub running_var: Buffer<T>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<(Vec<T>, Vec<T>)>, // (xhat, inv_std)
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(name: &str, c: usize) -> Self {
        BatchNorm2d {
            gamma: Param::filled(format!("{name}.weight"), vec![c], T::one()),
            beta: Param::filled(format!("{name}.bias"), vec![c], T::zero()),
            running_mean: Buffer { name: format!("{name}.running_mean"), value: vec![T::zero(); c] },
            running_var: Buffer { name: format!("{name}.running_var"), value: vec![T::one(); c] },
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Act<T>, mode: Mode) -> Act<T> {
        let (c, plane) = (x.c, x.plane());
        let count = x.n * plane;
        let eps = T::lit(self.eps);
        let (mean, var) = match mode {
            Mode::Train => {
                let mut mean = vec![T::zero(); c];
                let mut var = vec![T::zero(); c];
                for ch in 0..c {
                    let mut s = T::zero();
                    for b in 0..x.n {
                        s += x.data[(b * c + ch) * plane..][..plane].iter().copied().sum::<T>();
                    }
                    let m = s / T::from_usize_lossy(count);
                    let mut v = T::zero();
                    for b in 0..x.n {
                        v += x.data[(b * c + ch) * plane..][..plane].iter().map(|&e| (e - m) * (e - m)).sum::<T>();
                    }
                    mean[ch] = m;
                    var[ch] = v / T::from_usize_lossy(count);
                }
                let mom = T::lit(self.momentum);
                let unbias = if count > 1 { T::from_usize_lossy(count) / T::from_usize_lossy(count - 1) } else { T::one() };
                for ch in 0..c {
                    let rm = &mut self.running_mean.value[ch];
                    *rm = (T::one() - mom) * *rm + mom * mean[ch];
                    let rv = &mut self.running_var.value[ch];
                    *rv = (T::one() - mom) * *rv + mom * var[ch] * unbias;
                }
                (mean, var)
            }
            Mode::Eval => (self.running_mean.value.clone(), self.running_var.value.clone()),
        };
        let inv: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut xhat = vec![T::zero(); x.data.len()];
        let mut y = vec![T::zero(); x.data.len()];
        for b in 0..x.n {
            for ch in 0..c {
                let off = (b * c + ch) * plane;
                let (g, bt, m, iv) = (self.gamma.value[ch], self.beta.value[ch], mean[ch], inv[ch]);
                for i in off..off + plane {
                    let h = (x.data[i] - m) * iv;
                    xhat[i] = h;
                    y[i] = g * h + bt;
                }
            }
        }
        if mode == Mode::Train {
            self.cache = Some((xhat, inv));
        }
        x.like(y)
    }

    pub fn backward(&mut self, dy: &Act<T>) -> Act<T> {
        let (xhat, inv) = self.cache.take().expect("batchnorm backward before forward");
        let (c, plane) = (dy.c, dy.plane());
        let count = T::from_usize_lossy(dy.n * plane);
        let mut dx = vec![T::zero(); dy.data.len()];
        for ch in 0..c {
            let (mut sum_dy, mut sum_dy_xhat) = (T::zero(), T::zero());
            for b in 0..dy.n {
                let off = (b * c + ch) * plane;
                for i in off..off + plane {
                    sum_dy += dy.data[i];
                    sum_dy_xhat += dy.data[i] * xhat[i];
                }
            }
            self.gamma.grad[ch] += sum_dy_xhat;
            self.beta.grad[ch] += sum_dy;
            let g = self.gamma.value[ch];
            let k = g * inv[ch] / count;
            for b in 0..dy.n {
                let off = (b * c + ch) * plane;
                for i in off..off + plane {
                    dx[i] = k * (count * dy.data[i] - sum_dy - xhat[i] * sum_dy_xhat);
                }
            }
        }
        dy.like(dx)
    }
}

impl<T: Scalar> Visit<T> for BatchNorm2d<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }

    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Buffer<T>)) {
        f(&mut self.running_mean);
        f(&mut self.running_var);
    }
}

// ---------------------------------------------------------------------------

/// Batched matrix `rows x cols`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub data: Vec<T>,
    pub rows: usize,
    pub cols: usize,
}

impl<T: Scalar> Mat<T> {
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Param<T>,
    pub bias: Param<T>,
    input: Option<Mat<T>>,
}

impl<T: Scalar> Linear<T> {
    /// Uniform `+-1/sqrt(fan_in)` initialisation for weight and bias.
    pub fn new(name: &str, in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Linear {
            in_dim,
            out_dim,
            weight: Param::uniform(format!("{name}.weight"), vec![out_dim, in_dim], bound, rng),
            bias: Param::uniform(format!("{name}.bias"), vec![out_dim], bound, rng),
            input: None,
        }
    }

    pub fn forward(&mut self, x: &Mat<T>, mode: Mode) -> Mat<T> {
        assert_eq!(x.cols, self.in_dim, "linear input width");
        let mut y = vec![T::zero(); x.rows * self.out_dim];
        for b in 0..x.rows {
            let xr = x.row(b);
            for o in 0..self.out_dim {
                let w = &self.weight.value[o * self.in_dim..(o + 1) * self.in_dim];
                y[b * self.out_dim + o] = self.bias.value[o] + w.iter().zip(xr).map(|(&a, &v)| a * v).sum::<T>();
            }
        }
        if mode == Mode::Train {
            self.input = Some(x.clone());
        }
        Mat { data: y, rows: x.rows, cols: self.out_dim }
    }

    pub fn backward(&mut self, dy: &Mat<T>, need_dx: bool) -> Option<Mat<T>> {
        let x = self.input.take().expect("linear backward before forward");
        for b in 0..x.rows {
            let xr = x.row(b);
            for o in 0..self.out_dim {
                let g = dy.data[b * self.out_dim + o];
                self.bias.grad[o] += g;
                if g != T::zero() {
                    for (wg, &v) in self.weight.grad[o * self.in_dim..(o + 1) * self.in_dim].iter_mut().zip(xr) {
                        *wg += g * v;
                    }
                }
            }
        }
        need_dx.then(|| {
            let mut dx = vec![T::zero(); x.rows * self.in_dim];
            for b in 0..x.rows {
                let d = &mut dx[b * self.in_dim..(b + 1) * self.in_dim];
                for o in 0..self.out_dim {
                    let g = dy.data[b * self.out_dim + o];
                    for (dv, &w) in d.iter_mut().zip(&self.weight.value[o * self.in_dim..(o + 1) * self.in_dim]) {
                        *dv += g * w;
                    }
                }
            }
            Mat { data: dx, rows: x.rows, cols: self.in_dim }
        })
    }
}

impl<T: Scalar> Visit<T> for Linear<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LayerNorm<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub eps: f64,
    cache: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> LayerNorm<T> {
    pub fn new(name: &str, dim: usize) -> Self {
        LayerNorm {
            gamma: Param::filled(format!("{name}.weight"), vec![dim], T::one()),
            beta: Param::filled(format!("{name}.bias"), vec![dim], T::zero()),
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Mat<T>, mode: Mode) -> Mat<T> {
        let d = x.cols;
        let nd = T::from_usize_lossy(d);
        let mut xhat = vec![T::zero(); x.data.len()];
        let mut inv = vec![T::zero(); x.rows];
        let mut y = vec![T::zero(); x.data.len()];
        for b in 0..x.rows {
            let r = x.row(b);
            let m = r.iter().copied().sum::<T>() / nd;
            let v = r.iter().map(|&e| (e - m) * (e - m)).sum::<T>() / nd;
            let iv = T::one() / (v + T::lit(self.eps)).sqrt();
            inv[b] = iv;
            for j in 0..d {
                let h = (r[j] - m) * iv;
                xhat[b * d + j] = h;
                y[b * d + j] = self.gamma.value[j] * h + self.beta.value[j];
            }
        }
        if mode == Mode::Train {
            self.cache = Some((xhat, inv));
        }
        Mat { data: y, rows: x.rows, cols: d }
    }

    pub fn backward(&mut self, dy: &Mat<T>) -> Mat<T> {
        let (xhat, inv) = self.cache.take().expect("layernorm backward before forward");
        let d = dy.cols;
        let nd = T::from_usize_lossy(d);
        let mut dx = vec![T::zero(); dy.data.len()];
        for b in 0..dy.rows {
            let (mut s1, mut s2) = (T::zero(), T::zero());
            for j in 0..d {
                let i = b * d + j;
                self.gamma.grad[j] += dy.data[i] * xhat[i];
                self.beta.grad[j] += dy.data[i];
                let dh = dy.data[i] * self.gamma.value[j];
                s1 += dh;
                s2 += dh * xhat[i];
            }
            for j in 0..d {
                let i = b * d + j;
                let dh = dy.data[i] * self.gamma.value[j];
                dx[i] = inv[b] / nd * (nd * dh - s1 - xhat[i] * s2);
            }
        }
        Mat { data: dx, rows: dy.rows, cols: d }
    }
}

impl<T: Scalar> Visit<T> for LayerNorm<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}

// ---------------------------------------------------------------------------

/// In-place ReLU returning the active mask.
pub fn relu_inplace<T: Scalar>(x: &mut [T]) -> Vec<bool> {
    x.iter_mut()
        .map(|v| {
            let on = *v > T::zero();
            if !on {
                *v = T::zero();
            }
            on
        })
        .collect()
}

pub fn relu_backward<T: Scalar>(dy: &mut [T], mask: &[bool]) {
    for (g, &on) in dy.iter_mut().zip(mask) {
        if !on {
            *g = T::zero();
        }
    }
}
