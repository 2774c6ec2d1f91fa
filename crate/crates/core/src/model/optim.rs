use serde::{Deserialize, Serialize};

use super::layers::Visit;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

/// Adam with moments kept in parameter visiting order.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub cfg: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam { cfg, m: Vec::new(), v: Vec::new(), t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, model: &mut impl Visit<T>, lr: f64) {
        self.t += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (ob1, ob2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
        let step = T::lit(lr / bc1);
        let inv_bc2 = T::lit(1.0 / bc2);
        let eps = T::lit(c.eps);
        let wd = T::lit(c.weight_decay);
        let (ms, vs) = (&mut self.m, &mut self.v);
        let mut idx = 0;
        model.visit_params(&mut |p| {
            if ms.len() <= idx {
                ms.push(vec![T::zero(); p.len()]);
                vs.push(vec![T::zero(); p.len()]);
            }
            let (m, v) = (&mut ms[idx], &mut vs[idx]);
            for i in 0..p.value.len() {
                let g = p.grad[i] + wd * p.value[i];
                m[i] = b1 * m[i] + ob1 * g;
                v[i] = b2 * v[i] + ob2 * g * g;
                p.value[i] -= step * m[i] / ((v[i] * inv_bc2).sqrt() + eps);
            }
            idx += 1;
        });
    }
}

/// Cosine decay from `base` to zero over `total` epochs.
pub fn cosine_lr(base: f64, epoch: usize, total: usize) -> f64 {
    if total == 0 {
        return base;
    }
    0.5 * base * (1.0 + (std::f64::consts::PI * epoch as f64 / total as f64).cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::layers::Param;

    struct Quad(Param<f64>);

    impl Visit<f64> for Quad {
        fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<f64>)) {
            f(&mut self.0)
        }
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut q = Quad(Param { name: "w".into(), shape: vec![2], value: vec![1.0, -1.0], grad: vec![3.0, -0.5] });
        let mut opt = Adam::new(AdamConfig::default());
        opt.step(&mut q, 0.01);
        assert!((q.0.value[0] - 0.99).abs() < 1e-8);
        assert!((q.0.value[1] + 0.99).abs() < 1e-8);
    }

    #[test]
    fn minimises_quadratic() {
        let mut q = Quad(Param { name: "w".into(), shape: vec![1], value: vec![5.0], grad: vec![0.0] });
        let mut opt = Adam::new(AdamConfig::default());
        for _ in 0..2000 {
            q.0.grad[0] = 2.0 * (q.0.value[0] - 2.0);
            opt.step(&mut q, 0.05);
        }
        assert!((q.0.value[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn cosine_endpoints() {
        assert_eq!(cosine_lr(1e-3, 0, 30), 1e-3);
        assert!((cosine_lr(1e-3, 15, 30) - 5e-4).abs() < 1e-15);
        assert!(cosine_lr(1e-3, 30, 30).abs() < 1e-15);
    }
}
