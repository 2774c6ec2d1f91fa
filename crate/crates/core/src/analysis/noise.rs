use serde::{Deserialize, Serialize};

use super::{AnalysisError, Summary};
use crate::model::{predict, Dataset, Metrics, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub clean: Metrics,
    /// Confusion restricted to the classes present in the noisy set.
    pub noisy: Metrics,
    pub classes: Vec<usize>,
    pub delta_accuracy: f64,
}

fn check(net: &Network<f32>, data: &Dataset<f32>, which: &str) -> Result<(), AnalysisError> {
    if data.feature_len != net.feature_len() {
        return Err(AnalysisError::ModelModalityMismatch(format!(
            "{which} features have {} values, model expects {}",
            data.feature_len,
            net.feature_len()
        )));
    }
    if net.uses_aux() && data.aux.is_none() {
        return Err(AnalysisError::ModelModalityMismatch(format!("model uses the gait vector but the {which} set has none")));
    }
    if data.is_empty() {
        return Err(crate::model::ModelError::EmptyTestSet.into());
    }
    Ok(())
}

/// Scores a trained model on clean and noisy samples. The model is cloned,
/// never updated.
pub fn noise_eval(model: &Network<f32>, clean: &Dataset<f32>, noisy: &Dataset<f32>) -> Result<NoiseReport, AnalysisError> {
    check(model, clean, "clean")?;
    check(model, noisy, "noisy")?;
    let mut net = model.clone();
    let k = net.cfg.n_classes;
    let all_clean: Vec<usize> = (0..clean.len()).collect();
    let all_noisy: Vec<usize> = (0..noisy.len()).collect();
    let clean_m = Metrics::evaluate(&clean.labels, &predict(&mut net, clean, &all_clean, 64)?, k)?;
    let mut classes: Vec<usize> = noisy.labels.clone();
    classes.sort();
    classes.dedup();
    let noisy_m = Metrics::evaluate(&noisy.labels, &predict(&mut net, noisy, &all_noisy, 64)?, k)?.restricted(&classes);
    Ok(NoiseReport { delta_accuracy: noisy_m.accuracy - clean_m.accuracy, clean: clean_m, noisy: noisy_m, classes })
}

impl Summary for NoiseReport {
    fn summary(&self) -> String {
        format!(
            "noise robustness\n  clean accuracy {:.4} (macro-F1 {:.4}, n={})\n  noisy accuracy {:.4} (macro-F1 {:.4}, n={}, {} classes)\n  delta {:+.4}\n",
            self.clean.accuracy,
            self.clean.macro_f1,
            self.clean.n,
            self.noisy.accuracy,
            self.noisy.macro_f1,
            self.noisy.n,
            self.classes.len(),
            self.delta_accuracy
        )
    }
}
