use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::Mode;
use super::metrics::{mean_sd, Metrics};
use super::network::{Batch, Network, NetworkConfig};
use super::optim::{cosine_lr, Adam, AdamConfig};
use super::ModelError;
use crate::ingest::SplitPlan;
use crate::scalar::Scalar;

/// Flat, in-memory labelled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub features: Vec<T>,
    pub feature_len: usize,
    pub aux: Option<Vec<T>>,
    pub aux_len: usize,
    pub labels: Vec<usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Vec<T>, feature_len: usize, labels: Vec<usize>) -> Self {
        assert_eq!(features.len(), feature_len * labels.len());
        Dataset { features, feature_len, aux: None, aux_len: 0, labels }
    }

    pub fn with_aux(mut self, aux: Vec<T>, aux_len: usize) -> Self {
        assert_eq!(aux.len(), aux_len * self.labels.len());
        self.aux = Some(aux);
        self.aux_len = aux_len;
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn batch(&self, idx: &[usize]) -> Batch<T> {
        let f = self.feature_len;
        let mut features = Vec::with_capacity(idx.len() * f);
        for &i in idx {
            features.extend_from_slice(&self.features[i * f..(i + 1) * f]);
        }
        let aux = self.aux.as_ref().map(|a| {
            let d = self.aux_len;
            let mut out = Vec::with_capacity(idx.len() * d);
            for &i in idx {
                out.extend_from_slice(&a[i * d..(i + 1) * d]);
            }
            out
        });
        Batch { features, aux, len: idx.len() }
    }

    pub fn labels_of(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default = "default_true")]
    pub cosine: bool,
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { adam: AdamConfig::default(), batch_size: 64, epochs: 30, cosine: true, seed: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training loss per epoch.
    pub losses: Vec<f64>,
    /// Training-batch accuracy per epoch (train-mode forward).
    pub accuracy: Vec<f64>,
}

/// Trains `net` in place on the samples at `idx`.
pub fn fit<T: Scalar>(
    net: &mut Network<T>,
    data: &Dataset<T>,
    idx: &[usize],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainHistory, ModelError> {
    fit_until(net, data, idx, cfg, |epoch, loss, _| {
        on_epoch(epoch, loss);
        false
    })
}

/// Like [`fit`], but stops after any epoch for which `stop(epoch, mean_loss,
/// net)` returns true. The schedule still spans `cfg.epochs`.
pub fn fit_until<T: Scalar>(
    net: &mut Network<T>,
    data: &Dataset<T>,
    idx: &[usize],
    cfg: &TrainConfig,
    mut stop: impl FnMut(usize, f64, &mut Network<T>) -> bool,
) -> Result<TrainHistory, ModelError> {
    if idx.is_empty() {
        return Err(ModelError::EmptyTestSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(cfg.adam);
    let mut order = idx.to_vec();
    let mut hist = TrainHistory::default();
    let bs = cfg.batch_size.max(1);
    for epoch in 0..cfg.epochs {
        let lr = if cfg.cosine { cosine_lr(cfg.adam.lr, epoch, cfg.epochs) } else { cfg.adam.lr };
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for chunk in order.chunks(bs) {
            let batch = data.batch(chunk);
            let labels = data.labels_of(chunk);
            net.zero_grad();
            let logits = net.forward(&batch, Mode::Train).map_err(|e| match e {
                ModelError::NonFiniteActivation => ModelError::Divergence { epoch, loss: f64::NAN },
                e => e,
            })?;
            let (loss, dlogits) = super::network::softmax_cross_entropy(&logits, &labels);
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(ModelError::Divergence { epoch, loss });
            }
            correct += (0..logits.rows).filter(|&r| super::network::argmax(logits.row(r)) == labels[r]).count();
            loss_sum += loss * chunk.len() as f64;
            net.backward(&dlogits);
            opt.step(net, lr);
        }
        let mean = loss_sum / order.len() as f64;
        hist.losses.push(mean);
        hist.accuracy.push(correct as f64 / order.len() as f64);
        log::debug!("epoch {epoch}: loss {mean:.5} lr {lr:.2e}");
        if stop(epoch, mean, net) {
            break;
        }
    }
    Ok(hist)
}

/// Eval-mode predictions for the samples at `idx`, in order.
pub fn predict<T: Scalar>(net: &mut Network<T>, data: &Dataset<T>, idx: &[usize], batch_size: usize) -> Result<Vec<usize>, ModelError> {
    let mut out = Vec::with_capacity(idx.len());
    for chunk in idx.chunks(batch_size.max(1)) {
        out.extend(net.predict(&data.batch(chunk))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub metrics: Metrics,
    pub history: TrainHistory,
    pub truth: Vec<usize>,
    pub predictions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub mean_f1: f64,
    pub sd_f1: f64,
    pub mean_accuracy: f64,
}

impl CvReport {
    pub fn from_folds(folds: Vec<FoldResult>) -> Self {
        let f1: Vec<f64> = folds.iter().map(|f| f.metrics.macro_f1).collect();
        let acc: Vec<f64> = folds.iter().map(|f| f.metrics.accuracy).collect();
        let (mean_f1, sd_f1) = mean_sd(&f1);
        CvReport { folds, mean_f1, sd_f1, mean_accuracy: mean_sd(&acc).0 }
    }
}

/// Trains a fresh network per fold; fold indices refer to rows of `data`.
/// Returns the report and the trained networks in fold order.
pub fn cross_validate<T: Scalar>(
    net_cfg: &NetworkConfig,
    data: &Dataset<T>,
    plan: &SplitPlan,
    cfg: &TrainConfig,
) -> Result<(CvReport, Vec<Network<T>>), ModelError> {
    let mut results = Vec::new();
    let mut nets = Vec::new();
    for (k, fold) in plan.folds.iter().enumerate() {
        let mut net = Network::new(net_cfg.clone())?;
        let fold_cfg = TrainConfig { seed: cfg.seed.wrapping_add(k as u64), ..cfg.clone() };
        let history = fit(&mut net, data, &fold.train, &fold_cfg, |_, _| {})?;
        let predictions = predict(&mut net, data, &fold.test, cfg.batch_size)?;
        let truth = data.labels_of(&fold.test);
        let metrics = Metrics::evaluate(&truth, &predictions, net_cfg.n_classes)?;
        log::info!("fold {k}: macro-F1 {:.4} accuracy {:.4}", metrics.macro_f1, metrics.accuracy);
        results.push(FoldResult { fold: k, metrics, history, truth, predictions });
        nets.push(net);
    }
    Ok((CvReport::from_folds(results), nets))
}
