use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Classification scores; `confusion[truth][predicted]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<u64>>,
    pub n: usize,
}

impl Metrics {
    pub fn evaluate(truth: &[usize], pred: &[usize], n_classes: usize) -> Result<Self, ModelError> {
        if truth.is_empty() {
            return Err(ModelError::EmptyTestSet);
        }
        assert_eq!(truth.len(), pred.len(), "truth and prediction lengths differ");
        let mut confusion = vec![vec![0u64; n_classes]; n_classes];
        for (&t, &p) in truth.iter().zip(pred) {
            confusion[t][p] += 1;
        }
        Ok(Self::from_confusion(confusion))
    }

    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Self {
        let n: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..confusion.len()).map(|i| confusion[i][i]).sum();
        Metrics {
            accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
            macro_f1: macro_f1(&confusion),
            confusion,
            n: n as usize,
        }
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.confusion.iter().map(|r| r.iter().sum()).collect()
    }

    /// Rows and columns restricted to `classes`; predictions outside the
    /// subset count as errors but do not get a column.
    pub fn restricted(&self, classes: &[usize]) -> Metrics {
        let k = classes.len();
        let mut confusion = vec![vec![0u64; k]; k];
        let mut outside = 0u64;
        for (i, &t) in classes.iter().enumerate() {
            for (j, &p) in classes.iter().enumerate() {
                confusion[i][j] = self.confusion[t][p];
            }
            outside += self.confusion[t].iter().sum::<u64>() - confusion[i].iter().sum::<u64>();
        }
        let mut m = Metrics::from_confusion(confusion);
        let total = m.n as u64 + outside;
        let correct: u64 = (0..k).map(|i| m.confusion[i][i]).sum();
        m.accuracy = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
        m.n = total as usize;
        m
    }

    /// Relabels through `map` (old class -> new class) and recomputes.
    pub fn merged(&self, map: &[usize], n_new: usize) -> Metrics {
        let mut confusion = vec![vec![0u64; n_new]; n_new];
        for (t, row) in self.confusion.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                confusion[map[t]][map[p]] += c;
            }
        }
        Metrics::from_confusion(confusion)
    }
}

/// Unweighted mean F1 over classes that appear in the truth or predictions.
pub fn macro_f1(confusion: &[Vec<u64>]) -> f64 {
    let k = confusion.len();
    let present: BTreeSet<usize> = (0..k)
        .filter(|&c| confusion[c].iter().sum::<u64>() > 0 || (0..k).any(|r| confusion[r][c] > 0))
        .collect();
    if present.is_empty() {
        return 0.0;
    }
    let total: f64 = present
        .iter()
        .map(|&c| {
            let tp = confusion[c][c] as f64;
            let support: u64 = confusion[c].iter().sum();
            let predicted: u64 = (0..k).map(|r| confusion[r][c]).sum();
            let denom = support as f64 + predicted as f64;
            if denom == 0.0 {
                0.0
            } else {
                2.0 * tp / denom
            }
        })
        .sum();
    total / present.len() as f64
}

/// Mean and population standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
