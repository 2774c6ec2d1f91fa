use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, Summary};
use crate::model::{fit, predict, Metrics, Network, NetworkConfig, TrainConfig};
use crate::pipeline::{FeatureEntry, FeatureSet, Modality};
use crate::taxonomy::{Condition, Material};

/// Joint material x condition class: `2 * material_position + wet`.
pub fn wet_dry_class(e: &FeatureEntry) -> Option<usize> {
    let pos = Material::WET_DRY.iter().position(|&m| m == e.material)?;
    match e.condition {
        Condition::Dry => Some(2 * pos),
        Condition::Wet => Some(2 * pos + 1),
        _ => None,
    }
}

pub fn wet_dry_labels() -> Vec<String> {
    Material::WET_DRY.iter().flat_map(|m| [format!("{}_dry", m.name()), format!("{}_wet", m.name())]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WetDryReport {
    pub modality: Modality,
    pub labels: Vec<String>,
    pub metrics: Metrics,
    /// Collapsed to dry vs wet.
    pub condition_metrics: Metrics,
    /// Collapsed to the six materials.
    pub material_metrics: Metrics,
    pub n_train: usize,
    pub n_test: usize,
}

/// Trains a 12-class model on a seeded random 80% of the wet/dry samples and
/// scores the remaining 20%.
pub fn wet_dry_eval(
    fs: &FeatureSet,
    modality: Modality,
    tko: bool,
    net_template: &NetworkConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<WetDryReport, AnalysisError> {
    for m in Material::WET_DRY {
        for c in [Condition::Dry, Condition::Wet] {
            if !fs.index.entries.iter().any(|e| e.material == m && e.condition == c) {
                return Err(AnalysisError::MissingCondition { material: m, condition: c });
            }
        }
    }
    let kind = modality.feature_kind();
    let (data, _) = fs.dataset(kind, tko, wet_dry_class)?;
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (idx.len() * 4).div_ceil(5).min(idx.len() - 1);
    let (tr, te) = idx.split_at(n_train);

    let (rows, cols) = kind.layout().dims();
    let cfg = NetworkConfig {
        input_shape: (1, rows, cols),
        n_classes: 12,
        aux: if tko { net_template.aux.clone().or_else(|| Some(Default::default())) } else { None },
        ..net_template.clone()
    };
    let mut net = Network::new(cfg)?;
    fit(&mut net, &data, tr, train, |_, _| {})?;
    let pred = predict(&mut net, &data, te, train.batch_size)?;
    let truth = data.labels_of(te);
    let metrics = Metrics::evaluate(&truth, &pred, 12)?;
    let to_condition: Vec<usize> = (0..12).map(|c| c % 2).collect();
    let to_material: Vec<usize> = (0..12).map(|c| c / 2).collect();
    Ok(WetDryReport {
        modality,
        labels: wet_dry_labels(),
        condition_metrics: metrics.merged(&to_condition, 2),
        material_metrics: metrics.merged(&to_material, 6),
        metrics,
        n_train: tr.len(),
        n_test: te.len(),
    })
}

impl Summary for WetDryReport {
    fn summary(&self) -> String {
        format!(
            "wet/dry detection ({})\n  train {} / test {}\n  12-class macro-F1 {:.4} accuracy {:.4}\n  condition macro-F1 {:.4}, material macro-F1 {:.4}\n",
            self.modality.name(),
            self.n_train,
            self.n_test,
            self.metrics.macro_f1,
            self.metrics.accuracy,
            self.condition_metrics.macro_f1,
            self.material_metrics.macro_f1
        )
    }
}
