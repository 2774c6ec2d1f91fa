use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Mode, Visit};
use super::network::{softmax_cross_entropy, Batch, Network};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    pub min_params: usize,
    pub tolerance: f64,
    /// Samples where both gradients are below this in magnitude are exempt
    /// from the relative-error test.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig { epsilon: 1e-5, min_params: 200, tolerance: 1e-3, abs_floor: 1e-8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradSample {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

impl GradSample {
    pub fn exempt(&self, abs_floor: f64) -> bool {
        self.analytic.abs().max(self.numeric.abs()) < abs_floor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub samples: Vec<GradSample>,
    pub max_rel_error: f64,
    pub checked_tensors: Vec<String>,
}

impl GradCheckReport {
    pub fn offenders(&self, cfg: &GradCheckConfig) -> Vec<&GradSample> {
        self.samples
            .iter()
            .filter(|s| s.rel_error >= cfg.tolerance && !s.exempt(cfg.abs_floor))
            .collect()
    }
}

fn loss_of(net: &mut Network<f64>, batch: &Batch<f64>, labels: &[usize]) -> Result<f64, ModelError> {
    let logits = net.forward(batch, Mode::Train)?;
    Ok(softmax_cross_entropy(&logits, labels).0)
}

fn nudge(net: &mut Network<f64>, tensor: usize, elem: usize, delta: f64) {
    let mut t = 0;
    net.visit_params(&mut |p| {
        if t == tensor {
            p.value[elem] += delta;
        }
        t += 1;
    });
}

/// Compares back-propagated gradients against central differences on a
/// sample spread across every parameter tensor. Train-mode batch norm.
pub fn grad_check(net: &mut Network<f64>, batch: &Batch<f64>, labels: &[usize], cfg: &GradCheckConfig) -> Result<GradCheckReport, ModelError> {
    net.zero_grad();
    let logits = net.forward(batch, Mode::Train)?;
    let (_, dlogits) = softmax_cross_entropy(&logits, labels);
    net.backward(&dlogits);

    let mut tensors: Vec<(String, Vec<f64>)> = Vec::new();
    net.visit_params(&mut |p| tensors.push((p.name.clone(), p.grad.clone())));
    let per = cfg.min_params.div_ceil(tensors.len()).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picks = Vec::new();
    let mut rest = Vec::new();
    for (t, (_, g)) in tensors.iter().enumerate() {
        let chosen = sample(&mut rng, g.len(), per.min(g.len())).into_vec();
        let mut taken = vec![false; g.len()];
        for &i in &chosen {
            taken[i] = true;
            picks.push((t, i));
        }
        rest.extend((0..g.len()).filter(|&i| !taken[i]).map(|i| (t, i)));
    }
    // small tensors cannot fill their quota; top up from the remainder
    if picks.len() < cfg.min_params {
        let extra = (cfg.min_params - picks.len()).min(rest.len());
        picks.extend(sample(&mut rng, rest.len(), extra).into_iter().map(|j| rest[j]));
    }

    let mut samples = Vec::with_capacity(picks.len());
    for (t, i) in picks {
        let h = cfg.epsilon;
        nudge(net, t, i, h);
        let plus = loss_of(net, batch, labels)?;
        nudge(net, t, i, -2.0 * h);
        let minus = loss_of(net, batch, labels)?;
        nudge(net, t, i, h);
        let numeric = (plus - minus) / (2.0 * h);
        let analytic = tensors[t].1[i];
        let denom = analytic.abs().max(numeric.abs()).max(f64::MIN_POSITIVE);
        samples.push(GradSample {
            param: tensors[t].0.clone(),
            index: i,
            analytic,
            numeric,
            rel_error: (analytic - numeric).abs() / denom,
        });
    }
    let report = GradCheckReport {
        max_rel_error: samples
            .iter()
            .filter(|s| !s.exempt(cfg.abs_floor))
            .map(|s| s.rel_error)
            .fold(0.0, f64::max),
        checked_tensors: tensors.into_iter().map(|t| t.0).collect(),
        samples,
    };
    let bad = report.offenders(cfg);
    if !bad.is_empty() {
        return Err(ModelError::GradMismatch(
            bad.iter().map(|s| format!("{}[{}] analytic {:.3e} numeric {:.3e}", s.param, s.index, s.analytic, s.numeric)).collect(),
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::network::{AuxConfig, NetworkConfig};

    fn input(n: usize, len: usize) -> Vec<f64> {
        (0..n * len).map(|i| ((i as f64) * 0.37).sin() + 0.1 * ((i * i) as f64 * 0.01).cos()).collect()
    }

    #[test]
    fn two_block_projection_net() {
        let cfg = NetworkConfig { block_channels: vec![3, 5], input_shape: (1, 10, 10), n_classes: 4, aux: None, seed: 11 };
        let mut net = Network::<f64>::new(cfg).unwrap();
        assert!(net.blocks[1].shortcut.is_some());
        let batch = Batch { features: input(2, 100), aux: None, len: 2 };
        let report = grad_check(&mut net, &batch, &[1, 3], &GradCheckConfig::default()).unwrap();
        assert!(report.samples.len() >= 200);
        assert!(report.max_rel_error < 1e-3, "{}", report.max_rel_error);
    }

    #[test]
    fn aux_parameters_included() {
        let cfg = NetworkConfig {
            block_channels: vec![3, 4],
            input_shape: (1, 8, 8),
            n_classes: 3,
            aux: Some(AuxConfig { in_dim: 40, hidden: 6, layers: 2 }),
            seed: 5,
        };
        let mut net = Network::<f64>::new(cfg).unwrap();
        let batch = Batch { features: input(2, 64), aux: Some(input(2, 40).iter().map(|v| v * 3.0).collect()), len: 2 };
        let report = grad_check(&mut net, &batch, &[0, 2], &GradCheckConfig::default()).unwrap();
        assert!(report.samples.iter().any(|s| s.param.starts_with("aux_mlp.0")));
        assert!(report.samples.iter().any(|s| s.param.contains(".aux_ln")));
        assert!(report.max_rel_error < 1e-3);
    }
}
