use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::block::{BasicBlock, BlockConfig};
use super::layers::{relu_backward, relu_inplace, Act, BatchNorm2d, Buffer, Conv2d, Linear, Mat, Mode, Param, Visit};
use super::ModelError;
use crate::dsp::standardize;
use crate::scalar::Scalar;

/// Parameter count reported for the 10-layer network in the original study.
pub const REFERENCE_PARAM_COUNT: usize = 2_539_314;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxConfig {
    pub in_dim: usize,
    pub hidden: usize,
    /// Total MLP layers: `in_dim -> hidden`, then `layers - 1` maps `hidden -> hidden`.
    pub layers: usize,
}

impl Default for AuxConfig {
    fn default() -> Self {
        AuxConfig { in_dim: 3200, hidden: 128, layers: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub block_channels: Vec<usize>,
    /// `(channels, rows, cols)`; channels must be 1.
    pub input_shape: (usize, usize, usize),
    pub n_classes: usize,
    #[serde(default)]
    pub aux: Option<AuxConfig>,
    pub seed: u64,
}

impl NetworkConfig {
    /// Five blocks of 32/64/128/256/512 channels.
    pub fn vibwalk(rows: usize, cols: usize, n_classes: usize, tko: bool) -> Self {
        NetworkConfig {
            block_channels: vec![32, 64, 128, 256, 512],
            input_shape: (1, rows, cols),
            n_classes,
            aux: tko.then(AuxConfig::default),
            seed: 0,
        }
    }

    /// Same topology with every width divided by `divisor`, for CPU-scale runs.
    pub fn narrowed(mut self, divisor: usize) -> Self {
        self.block_channels.iter_mut().for_each(|c| *c = (*c / divisor).max(1));
        self
    }

    pub fn block_configs(&self) -> Vec<BlockConfig> {
        let aux_dim = self.aux.as_ref().map_or(0, |a| a.hidden);
        let mut prev = self.block_channels[0];
        self.block_channels
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let cfg = BlockConfig { in_channels: prev, out_channels: c, stride: if i == 0 { 1 } else { 2 }, use_aux: aux_dim > 0, aux_dim };
                prev = c;
                cfg
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let (c, r, w) = self.input_shape;
        if c != 1 {
            return Err(ModelError::BadShape(format!("input must have 1 channel, got {c}")));
        }
        if r < 8 || w < 8 {
            return Err(ModelError::BadShape(format!("input {r}x{w} is smaller than 8x8")));
        }
        if self.n_classes < 2 {
            return Err(ModelError::BadShape(format!("need at least 2 classes, got {}", self.n_classes)));
        }
        if self.block_channels.is_empty() || self.block_channels.contains(&0) {
            return Err(ModelError::BadShape("block channels must be non-empty and positive".into()));
        }
        if let Some(a) = &self.aux {
            if a.in_dim == 0 || a.hidden == 0 || a.layers == 0 {
                return Err(ModelError::BadShape("auxiliary MLP dimensions must be positive".into()));
            }
        }
        Ok(())
    }
}

/// A batch of standardisable 2-D features plus optional auxiliary vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub features: Vec<T>,
    pub aux: Option<Vec<T>>,
    pub len: usize,
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    pub cfg: NetworkConfig,
    pub stem: Conv2d<T>,
    pub stem_bn: BatchNorm2d<T>,
    pub blocks: Vec<BasicBlock<T>>,
    pub aux_mlp: Vec<Linear<T>>,
    pub fc: Linear<T>,
    stem_mask: Vec<bool>,
    aux_masks: Vec<Vec<bool>>,
    pooled_shape: (usize, usize, usize, usize),
    aux_active: bool,
}

impl<T: Scalar> Network<T> {
    pub fn new(cfg: NetworkConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let c0 = cfg.block_channels[0];
        let stem = Conv2d::new("stem.conv", 1, c0, 3, 1, &mut rng);
        let blocks = cfg
            .block_configs()
            .into_iter()
            .enumerate()
            .map(|(i, b)| BasicBlock::new(&format!("layer{}", i + 1), b, &mut rng))
            .collect();
        let aux_mlp = cfg
            .aux
            .as_ref()
            .map(|a| {
                (0..a.layers)
                    .map(|l| Linear::new(&format!("aux_mlp.{l}"), if l == 0 { a.in_dim } else { a.hidden }, a.hidden, &mut rng))
                    .collect()
            })
            .unwrap_or_default();
        let fc = Linear::new("fc", *cfg.block_channels.last().unwrap(), cfg.n_classes, &mut rng);
        Ok(Network {
            stem,
            stem_bn: BatchNorm2d::new("stem.bn", c0),
            blocks,
            aux_mlp,
            fc,
            cfg,
            stem_mask: Vec::new(),
            aux_masks: Vec::new(),
            pooled_shape: (0, 0, 0, 0),
            aux_active: false,
        })
    }

    pub fn uses_aux(&self) -> bool {
        self.cfg.aux.is_some()
    }

    pub fn feature_len(&self) -> usize {
        self.cfg.input_shape.1 * self.cfg.input_shape.2
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.len());
        n
    }

    pub fn zero_grad(&mut self) {
        self.visit_params(&mut |p| p.zero_grad());
    }

    /// Logits as a `batch x n_classes` matrix.
    pub fn forward(&mut self, batch: &Batch<T>, mode: Mode) -> Result<Mat<T>, ModelError> {
        let (_, rows, cols) = self.cfg.input_shape;
        let flen = rows * cols;
        if batch.features.len() != batch.len * flen || batch.len == 0 {
            return Err(ModelError::ShapeMismatch(format!(
                "expected {} x {rows}x{cols} features, got {} values",
                batch.len,
                batch.features.len()
            )));
        }
        let mut data = Vec::with_capacity(batch.features.len());
        for s in batch.features.chunks_exact(flen) {
            data.extend(standardize(s));
        }
        let x = Act { data, n: batch.len, c: 1, h: rows, w: cols };

        let aux = match (&self.cfg.aux, &batch.aux) {
            (Some(a), Some(v)) => {
                if v.len() != batch.len * a.in_dim {
                    return Err(ModelError::ShapeMismatch(format!(
                        "auxiliary input needs {} values per sample, got {}",
                        a.in_dim,
                        v.len() / batch.len.max(1)
                    )));
                }
                let mut std = Vec::with_capacity(v.len());
                for s in v.chunks_exact(a.in_dim) {
                    std.extend(standardize(s));
                }
                let mut h = Mat { data: std, rows: batch.len, cols: a.in_dim };
                self.aux_masks.clear();
                let last = self.aux_mlp.len() - 1;
                for (i, layer) in self.aux_mlp.iter_mut().enumerate() {
                    h = layer.forward(&h, mode);
                    if i < last {
                        self.aux_masks.push(relu_inplace(&mut h.data));
                    }
                }
                Some(h)
            }
            _ => None,
        };
        self.aux_active = aux.is_some();

        let mut h = self.stem_bn.forward(&self.stem.forward(&x, mode), mode);
        self.stem_mask = relu_inplace(&mut h.data);
        for b in &mut self.blocks {
            h = b.forward(&h, aux.as_ref(), mode);
        }
        self.pooled_shape = (h.n, h.c, h.h, h.w);
        let plane = h.plane();
        let inv = T::one() / T::from_usize_lossy(plane);
        let pooled: Vec<T> = h.data.chunks_exact(plane).map(|p| p.iter().copied().sum::<T>() * inv).collect();
        let logits = self.fc.forward(&Mat { data: pooled, rows: h.n, cols: h.c }, mode);
        if logits.data.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteActivation);
        }
        Ok(logits)
    }

    /// Back-propagates `d loss / d logits` from the last training forward.
    pub fn backward(&mut self, dlogits: &Mat<T>) {
        let dpool = self.fc.backward(dlogits, true).expect("dx");
        let (n, c, hh, ww) = self.pooled_shape;
        let plane = hh * ww;
        let inv = T::one() / T::from_usize_lossy(plane);
        let mut data = vec![T::zero(); n * c * plane];
        for (i, g) in dpool.data.iter().enumerate() {
            data[i * plane..(i + 1) * plane].iter_mut().for_each(|v| *v = *g * inv);
        }
        let mut dh = Act { data, n, c, h: hh, w: ww };
        let mut daux: Option<Mat<T>> = None;
        for b in self.blocks.iter_mut().rev() {
            let (dx, da) = b.backward(&dh);
            dh = dx;
            if let Some(da) = da {
                match &mut daux {
                    Some(acc) => acc.data.iter_mut().zip(&da.data).for_each(|(a, b)| *a += *b),
                    None => daux = Some(da),
                }
            }
        }
        relu_backward(&mut dh.data, &self.stem_mask);
        let dstem = self.stem_bn.backward(&dh);
        self.stem.backward(&dstem, false);

        if let (true, Some(mut g)) = (self.aux_active, daux) {
            for (i, layer) in self.aux_mlp.iter_mut().enumerate().rev() {
                if i < self.aux_masks.len() {
                    relu_backward(&mut g.data, &self.aux_masks[i]);
                }
                match layer.backward(&g, i > 0) {
                    Some(dx) => g = dx,
                    None => break,
                }
            }
        }
    }

    /// Mean softmax cross-entropy; fills gradients when `mode` is `Train`.
    pub fn loss(&mut self, batch: &Batch<T>, labels: &[usize], mode: Mode) -> Result<T, ModelError> {
        let logits = self.forward(batch, mode)?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, labels);
        if mode == Mode::Train {
            self.backward(&dlogits);
        }
        Ok(loss)
    }

    pub fn predict(&mut self, batch: &Batch<T>) -> Result<Vec<usize>, ModelError> {
        let logits = self.forward(batch, Mode::Eval)?;
        Ok((0..logits.rows).map(|r| argmax(logits.row(r))).collect())
    }
}

impl<T: Scalar> Visit<T> for Network<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.stem.visit_params(f);
        self.stem_bn.visit_params(f);
        for b in &mut self.blocks {
            b.visit_params(f);
        }
        for l in &mut self.aux_mlp {
            l.visit_params(f);
        }
        self.fc.visit_params(f);
    }

    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Buffer<T>)) {
        self.stem_bn.visit_buffers(f);
        for b in &mut self.blocks {
            b.visit_buffers(f);
        }
    }
}

pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

pub fn softmax<T: Scalar>(row: &[T]) -> Vec<T> {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = row.iter().map(|&v| (v - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean cross-entropy over the batch and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Mat<T>, labels: &[usize]) -> (T, Mat<T>) {
    assert_eq!(logits.rows, labels.len());
    let n = T::from_usize_lossy(logits.rows);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(logits.data.len());
    for (r, &y) in labels.iter().enumerate() {
        let p = softmax(logits.row(r));
        loss -= p[y].max(T::min_positive_value()).ln();
        grad.extend(p.iter().enumerate().map(|(k, &pk)| (pk - if k == y { T::one() } else { T::zero() }) / n));
    }
    (loss / n, Mat { data: grad, rows: logits.rows, cols: logits.cols })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(n: usize, rows: usize, cols: usize, aux: Option<usize>) -> Batch<f32> {
        let features = (0..n * rows * cols).map(|i| ((i * 7919) % 101) as f32 / 50.0 - 1.0).collect();
        let aux = aux.map(|d| (0..n * d).map(|i| ((i * 31) % 17) as f32 - 8.0).collect());
        Batch { features, aux, len: n }
    }

    #[test]
    fn fused_input_gives_eighteen_logits() {
        let mut net = Network::<f32>::new(NetworkConfig::vibwalk(64, 102, 18, false).narrowed(8)).unwrap();
        let out = net.forward(&batch(4, 64, 102, None), Mode::Eval).unwrap();
        assert_eq!((out.rows, out.cols), (4, 18));
        assert!(out.data.iter().all(|v| v.is_finite()));
        for r in 0..4 {
            let s: f32 = softmax(out.row(r)).iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mic_input_shape() {
        let mut net = Network::<f32>::new(NetworkConfig::vibwalk(64, 61, 18, false).narrowed(16)).unwrap();
        assert_eq!(net.forward(&batch(2, 64, 61, None), Mode::Eval).unwrap().cols, 18);
        assert!(matches!(net.forward(&batch(2, 64, 60, None), Mode::Eval), Err(ModelError::ShapeMismatch(_))));
    }

    #[test]
    fn ten_conv_layers_and_reported_count() {
        let mut net = Network::<f32>::new(NetworkConfig::vibwalk(64, 61, 18, false)).unwrap();
        assert_eq!(net.blocks.len(), 5);
        assert_eq!(net.blocks.iter().map(|_| 2).sum::<usize>(), 10);
        let strides: Vec<usize> = net.blocks.iter().map(|b| b.cfg.stride).collect();
        assert_eq!(strides, [1, 2, 2, 2, 2]);
        let count = net.param_count();
        log::info!("parameter count {count} vs reference {REFERENCE_PARAM_COUNT}");
        assert!(count > 1_000_000);
    }

    #[test]
    fn identical_inputs_identical_rows() {
        let mut net = Network::<f32>::new(NetworkConfig::vibwalk(16, 16, 3, false).narrowed(8)).unwrap();
        let one = batch(1, 16, 16, None);
        let two = Batch { features: [one.features.clone(), one.features.clone()].concat(), aux: None, len: 2 };
        let out = net.forward(&two, Mode::Eval).unwrap();
        assert_eq!(out.row(0), out.row(1));
    }

    #[test]
    fn bad_configs() {
        let mut cfg = NetworkConfig::vibwalk(64, 61, 18, false);
        cfg.n_classes = 1;
        assert!(matches!(Network::<f32>::new(cfg), Err(ModelError::BadShape(_))));
        assert!(Network::<f32>::new(NetworkConfig::vibwalk(7, 61, 18, false)).is_err());
    }

    #[test]
    fn aux_ablation_only_through_bias_terms() {
        let mut cfg = NetworkConfig::vibwalk(16, 16, 4, true).narrowed(8);
        cfg.aux = Some(AuxConfig { in_dim: 3200, hidden: 16, layers: 2 });
        let mut net = Network::<f64>::new(cfg).unwrap();
        let base = Batch { features: (0..512).map(|i| (i as f64 * 0.13).sin()).collect(), aux: None, len: 2 };
        let zero_aux = Batch { aux: Some(vec![0.0; 6400]), ..base.clone() };
        let absent = net.forward(&base, Mode::Eval).unwrap();
        let with_bias = net.forward(&zero_aux, Mode::Eval).unwrap();
        assert_ne!(absent.data, with_bias.data);
        // zero every bias/shift on the auxiliary path: zero input then contributes nothing
        for l in &mut net.aux_mlp {
            l.bias.value.iter_mut().for_each(|v| *v = 0.0);
        }
        for b in &mut net.blocks {
            let (fc, ln) = b.aux.as_mut().unwrap();
            fc.bias.value.iter_mut().for_each(|v| *v = 0.0);
            ln.beta.value.iter_mut().for_each(|v| *v = 0.0);
        }
        let without_bias = net.forward(&zero_aux, Mode::Eval).unwrap();
        for (a, b) in absent.data.iter().zip(&without_bias.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_gradient_rows_sum_to_zero() {
        let logits = Mat { data: vec![1.0f64, 2.0, 0.5, -1.0, 0.0, 3.0], rows: 2, cols: 3 };
        let (loss, g) = softmax_cross_entropy(&logits, &[1, 2]);
        assert!(loss > 0.0);
        for r in 0..2 {
            assert!(g.row(r).iter().sum::<f64>().abs() < 1e-15);
        }
    }
}
