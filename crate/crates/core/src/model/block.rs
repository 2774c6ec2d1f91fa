use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{relu_backward, relu_inplace, Act, BatchNorm2d, Buffer, Conv2d, LayerNorm, Linear, Mat, Mode, Param, Visit};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub use_aux: bool,
    /// Width of the auxiliary embedding, 0 when unused.
    pub aux_dim: usize,
}

impl BlockConfig {
    pub fn needs_projection(&self) -> bool {
        self.in_channels != self.out_channels || self.stride != 1
    }
}

/// Two 3x3 conv + batch-norm layers with a shortcut, and an optional
/// auxiliary embedding projected to the channel width, layer-normalised and
/// added after the residual sum.
#[derive(Debug, Clone)]
pub struct BasicBlock<T> {
    pub cfg: BlockConfig,
    pub conv1: Conv2d<T>,
    pub bn1: BatchNorm2d<T>,
    pub conv2: Conv2d<T>,
    pub bn2: BatchNorm2d<T>,
    pub shortcut: Option<(Conv2d<T>, BatchNorm2d<T>)>,
    pub aux: Option<(Linear<T>, LayerNorm<T>)>,
    mask1: Vec<bool>,
    mask_out: Vec<bool>,
    aux_used: bool,
}

impl<T: Scalar> BasicBlock<T> {
    pub fn new(name: &str, cfg: BlockConfig, rng: &mut impl Rng) -> Self {
        let (i, o, s) = (cfg.in_channels, cfg.out_channels, cfg.stride);
        let shortcut = cfg.needs_projection().then(|| {
            (Conv2d::new(&format!("{name}.shortcut.0"), i, o, 1, s, rng), BatchNorm2d::new(&format!("{name}.shortcut.1"), o))
        });
        let aux = (cfg.use_aux && cfg.aux_dim > 0).then(|| {
            (Linear::new(&format!("{name}.aux_fc"), cfg.aux_dim, o, rng), LayerNorm::new(&format!("{name}.aux_ln"), o))
        });
        BasicBlock {
            cfg,
            conv1: Conv2d::new(&format!("{name}.conv1"), i, o, 3, s, rng),
            bn1: BatchNorm2d::new(&format!("{name}.bn1"), o),
            conv2: Conv2d::new(&format!("{name}.conv2"), o, o, 3, 1, rng),
            bn2: BatchNorm2d::new(&format!("{name}.bn2"), o),
            shortcut,
            aux,
            mask1: Vec::new(),
            mask_out: Vec::new(),
            aux_used: false,
        }
    }

    pub fn forward(&mut self, x: &Act<T>, aux: Option<&Mat<T>>, mode: Mode) -> Act<T> {
        let mut h = self.bn1.forward(&self.conv1.forward(x, mode), mode);
        self.mask1 = relu_inplace(&mut h.data);
        let mut out = self.bn2.forward(&self.conv2.forward(&h, mode), mode);
        match &mut self.shortcut {
            Some((conv, bn)) => {
                let sc = bn.forward(&conv.forward(x, mode), mode);
                out.data.iter_mut().zip(&sc.data).for_each(|(o, s)| *o += *s);
            }
            None => out.data.iter_mut().zip(&x.data).for_each(|(o, s)| *o += *s),
        }
        self.aux_used = false;
        if let (Some((fc, ln)), Some(a)) = (&mut self.aux, aux) {
            let e = ln.forward(&fc.forward(a, mode), mode);
            let plane = out.plane();
            for b in 0..out.n {
                for c in 0..out.c {
                    let add = e.data[b * out.c + c];
                    out.data[(b * out.c + c) * plane..][..plane].iter_mut().for_each(|v| *v += add);
                }
            }
            self.aux_used = true;
        }
        self.mask_out = relu_inplace(&mut out.data);
        out
    }

    /// Returns the input gradient and, when the auxiliary path was used, the
    /// gradient with respect to the auxiliary embedding.
    pub fn backward(&mut self, dy: &Act<T>) -> (Act<T>, Option<Mat<T>>) {
        let mut ds = dy.clone();
        relu_backward(&mut ds.data, &self.mask_out);

        let daux = if self.aux_used {
            let (fc, ln) = self.aux.as_mut().expect("aux path");
            let plane = ds.plane();
            let de: Vec<T> = (0..ds.n * ds.c)
                .map(|bc| ds.data[bc * plane..(bc + 1) * plane].iter().copied().sum())
                .collect();
            let de = Mat { data: de, rows: ds.n, cols: ds.c };
            fc.backward(&ln.backward(&de), true)
        } else {
            None
        };

        let mut dh = self.conv2.backward(&self.bn2.backward(&ds), true).expect("dx");
        relu_backward(&mut dh.data, &self.mask1);
        let mut dx = self.conv1.backward(&self.bn1.backward(&dh), true).expect("dx");
        match &mut self.shortcut {
            Some((conv, bn)) => {
                let dsc = conv.backward(&bn.backward(&ds), true).expect("dx");
                dx.data.iter_mut().zip(&dsc.data).for_each(|(a, b)| *a += *b);
            }
            None => dx.data.iter_mut().zip(&ds.data).for_each(|(a, b)| *a += *b),
        }
        (dx, daux)
    }
}

impl<T: Scalar> Visit<T> for BasicBlock<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.conv1.visit_params(f);
        self.bn1.visit_params(f);
        self.conv2.visit_params(f);
        self.bn2.visit_params(f);
        if let Some((c, b)) = &mut self.shortcut {
            c.visit_params(f);
            b.visit_params(f);
        }
        if let Some((l, n)) = &mut self.aux {
            l.visit_params(f);
            n.visit_params(f);
        }
    }

    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Buffer<T>)) {
        self.bn1.visit_buffers(f);
        self.bn2.visit_buffers(f);
        if let Some((_, b)) = &mut self.shortcut {
            b.visit_buffers(f);
        }
    }
}
