use serde::{Deserialize, Serialize};

use super::{AnalysisError, Summary};
use crate::ingest::SplitPlan;
use crate::model::{cross_validate, CvReport, Dataset, Metrics, NetworkConfig, TrainConfig};

/// The three paving materials that are hard to tell apart underfoot.
pub const PAVING_MERGE: [&str; 3] = ["asphalt", "slab", "concrete"];

/// Maps every label to its new index; members of `merge` collapse onto the
/// position of the first member. Returns the map and the new label names.
pub fn merge_map(labels: &[String], merge: &[&str]) -> Result<(Vec<usize>, Vec<String>), AnalysisError> {
    for m in merge {
        if !labels.iter().any(|l| l == m) {
            return Err(AnalysisError::UnknownLabel(m.to_string()));
        }
    }
    let merged_name = merge.join("+");
    let mut names: Vec<String> = Vec::new();
    let mut map = Vec::with_capacity(labels.len());
    let mut merged_at = None;
    for l in labels {
        if merge.contains(&l.as_str()) {
            let at = *merged_at.get_or_insert_with(|| {
                names.push(merged_name.clone());
                names.len() - 1
            });
            map.push(at);
        } else {
            names.push(l.clone());
            map.push(names.len() - 1);
        }
    }
    Ok((map, names))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub labels: Vec<String>,
    pub merged_labels: Vec<String>,
    pub baseline: Metrics,
    /// Baseline predictions relabelled, no retraining.
    pub merged: Metrics,
    /// Retrained on merged labels, when run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrained: Option<CvSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub mean_f1: f64,
    pub sd_f1: f64,
    pub mean_accuracy: f64,
}

impl From<&CvReport> for CvSummary {
    fn from(r: &CvReport) -> Self {
        CvSummary { mean_f1: r.mean_f1, sd_f1: r.sd_f1, mean_accuracy: r.mean_accuracy }
    }
}

/// Pools stored fold predictions and recomputes metrics under the merged
/// labelling.
pub fn merge_and_eval(baseline: &CvReport, labels: &[String], merge: &[&str]) -> Result<MergeReport, AnalysisError> {
    let (map, merged_labels) = merge_map(labels, merge)?;
    let truth: Vec<usize> = baseline.folds.iter().flat_map(|f| f.truth.iter().copied()).collect();
    let pred: Vec<usize> = baseline.folds.iter().flat_map(|f| f.predictions.iter().copied()).collect();
    let base = Metrics::evaluate(&truth, &pred, labels.len())?;
    Ok(MergeReport { merged: base.merged(&map, merged_labels.len()), baseline: base, labels: labels.to_vec(), merged_labels, retrained: None })
}

/// Cross-validates a fresh model on the merged labelling.
pub fn retrain_merged(
    data: &Dataset<f32>,
    plan: &SplitPlan,
    net_cfg: &NetworkConfig,
    train: &TrainConfig,
    map: &[usize],
    n_merged: usize,
) -> Result<CvReport, AnalysisError> {
    let relabelled = Dataset { labels: data.labels.iter().map(|&l| map[l]).collect(), ..data.clone() };
    let cfg = NetworkConfig { n_classes: n_merged, ..net_cfg.clone() };
    Ok(cross_validate(&cfg, &relabelled, plan, train)?.0)
}

impl Summary for MergeReport {
    fn summary(&self) -> String {
        let mut s = format!(
            "category merging ({} -> {} labels)\n  baseline accuracy {:.4} macro-F1 {:.4}\n  merged   accuracy {:.4} macro-F1 {:.4}\n",
            self.labels.len(),
            self.merged_labels.len(),
            self.baseline.accuracy,
            self.baseline.macro_f1,
            self.merged.accuracy,
            self.merged.macro_f1
        );
        if let Some(r) = &self.retrained {
            s += &format!("  retrained accuracy {:.4} macro-F1 {:.4} (sd {:.4})\n", r.mean_accuracy, r.mean_f1, r.sd_f1);
        }
        s
    }
}
